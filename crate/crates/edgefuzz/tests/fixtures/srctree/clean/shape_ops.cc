#include <ATen/ATen.h>

namespace at {
namespace native {

Tensor reshape_view(const Tensor& self, IntArrayRef shape) {
  TORCH_CHECK(!shape.empty(), "reshape: shape must not be empty");
  TORCH_CHECK(self.numel() > 0, "reshape: cannot reshape an empty tensor");
  return reshape_impl(self, shape);
}

Tensor expand_size(const Tensor& self, IntArrayRef sizes, int64_t implicit) {
  TORCH_CHECK(sizes.size() >= 1, "expand: sizes must contain at least one element");
  TORCH_CHECK(implicit >= 0, "expand: implicit must be non-negative");
  TORCH_CHECK(!self.is_complex(), "expand: complex tensors are not supported");
  return expand_impl(self, sizes, implicit);
}

Tensor narrow_copy(const Tensor& self, int64_t dim, int64_t start, int64_t length) {
  TORCH_CHECK(dim >= 0, "narrow: dim must be non-negative");
  TORCH_CHECK(start >= 0, "narrow: start must be non-negative");
  TORCH_CHECK(length >= 0, "narrow: length must be non-negative");
  TORCH_CHECK(start + length <= self.size(dim), "narrow: window exceeds tensor bounds");
  return narrow_impl(self, dim, start, length);
}

Tensor scale_grid(const Tensor& self, double scale) {
  TORCH_CHECK(scale >= 0, "scale_grid: scale must be non-negative");
  TORCH_CHECK(!self.is_complex(), "scale_grid: complex grids are not supported");
  return scale_impl(self, scale);
}

} // namespace native
} // namespace at
