#include <ATen/ATen.h>

namespace at {
namespace native {

Tensor sum_dim(const Tensor& self, int64_t dim, bool keepdim) {
  TORCH_CHECK(dim >= 0, "sum_dim: dim must be non-negative");
  TORCH_CHECK(!self.is_complex(), "sum_dim: complex reduction is unsupported");
  return sum_impl(self, dim, keepdim);
}

Tensor prod(const Tensor& self) {
  TORCH_CHECK(self.numel() > 0, "prod: cannot reduce an empty tensor");
  return prod_impl(self);
}

Tensor norm_impl(const Tensor& self, Scalar p) {
  TORCH_CHECK(p.toDouble() >= 0, "norm: p must be non-negative");
  TORCH_CHECK(self.is_floating_point(), "norm expects a floating-point tensor");
  return norm_stub(self, p);
}

int64_t count_nonzero(const Tensor& self, IntArrayRef dims) {
  TORCH_CHECK(dims.size() <= 1, "count_nonzero: at most one reduction dim");
  TORCH_CHECK(!self.is_complex(), "count_nonzero: complex tensors are not supported");
  return count_impl(self, dims);
}

void check_stats(const Tensor& mean, const Tensor& var, double eps) {
  AT_CHECK(mean.sizes() == var.sizes(), "mean and var must have the same shape");
  AT_CHECK(eps > 0, "eps must be positive");
  TORCH_CHECK(var.numel() > 0, "var must not be an empty tensor");
}

} // namespace native
} // namespace at
