#pragma once

#include "srunit/core/rng.hpp"
#include "srunit/core/tensor.hpp"

namespace srunit {

/// History buffer of generated images for the discriminator update.
template <typename Scalar>
class ImagePool {
 public:
  explicit ImagePool(Index capacity = 50, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {
    if (capacity < 0) throw ArgumentError("pool capacity must be >= 0");
  }

  /// Per image of `fresh` (N x C x H x W): under capacity insert and return it;
  /// when full, with probability 1/2 return it, otherwise return a random stored
  /// image and store the fresh one in its place. Returns new storage always.
  Tensor<Scalar> query(const Tensor<Scalar>& fresh) {
    fresh.require_rank(4);
    if (capacity_ == 0) return fresh;
    Tensor<Scalar> out(fresh.shape());
    const Shape one{1, fresh.c(), fresh.h(), fresh.w()};
    for (Index n = 0; n < fresh.n(); ++n) {
      Tensor<Scalar> img(one);
      img.vec() = fresh.vec().segment(n * one.numel(), one.numel());
      if (static_cast<Index>(images_.size()) < capacity_) {
        images_.push_back(img);
        out.vec().segment(n * one.numel(), one.numel()) = img.vec();
        ++fresh_returns_;
      } else if (rng_.uniform() < 0.5) {
        out.vec().segment(n * one.numel(), one.numel()) = img.vec();
        ++fresh_returns_;
      } else {
        const size_t k = static_cast<size_t>(rng_.below(images_.size()));
        if (images_[k].shape() != one) throw DimensionError("pool image size changed");
        out.vec().segment(n * one.numel(), one.numel()) = images_[k].vec();
        images_[k] = std::move(img);
      }
      ++queries_;
    }
    return out;
  }

  Index capacity() const { return capacity_; }
  Index size() const { return static_cast<Index>(images_.size()); }
  std::int64_t queries() const { return queries_; }
  std::int64_t fresh_returns() const { return fresh_returns_; }

  const std::vector<Tensor<Scalar>>& images() const { return images_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  void restore(std::vector<Tensor<Scalar>> images, const std::string& rng_state) {
    if (static_cast<Index>(images.size()) > capacity_) throw CheckpointError("pool holds more images than capacity");
    images_ = std::move(images);
    rng_.set_state(rng_state);
  }

 private:
  Index capacity_;
  Rng rng_;
  std::vector<Tensor<Scalar>> images_;
  std::int64_t queries_ = 0, fresh_returns_ = 0;
};

}  // namespace srunit
