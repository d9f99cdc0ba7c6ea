#include <ATen/ATen.h>

namespace at {
namespace native {

Tensor& abs_(Tensor& self) {
  TORCH_CHECK(!self.is_complex(), "In-place abs is not supported for complex tensors.");
  return unary_op_impl_(self, at::abs_out);
}

Tensor& sgn_(Tensor& self) {
  auto tmp = compute_budget();
  TORCH_CHECK(!self.is_complex(), "sgn_ does not support complex tensors");
  TORCH_CHECK(tmp > 0, "compute budget exhausted");
  return unary_op_impl_(self, at::sgn_out);
}

Tensor angle(const Tensor& self) {
  TORCH_CHECK(self.is_floating_point(), "angle expects a floating-point tensor");
  return unary_op_impl(self, at::angle_out);
}

Tensor& round_out(const Tensor& self, Tensor& result) {
  TORCH_CHECK(!self.is_complex(), "round is not supported for complex inputs");
  TORCH_CHECK(result.numel() > 0, "result must not be an empty tensor");
  return unary_op_impl_out(result, self, round_stub);
}

Tensor frac(const Tensor& self, int64_t decimals) {
  TORCH_CHECK(decimals >= 0, "decimals must be non-negative");
  TORCH_CHECK(!self.is_complex(), "frac is not supported for complex inputs");
  return unary_op_impl(self, frac_stub);
}

} // namespace native
} // namespace at
