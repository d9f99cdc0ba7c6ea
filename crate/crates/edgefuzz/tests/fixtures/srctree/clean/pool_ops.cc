#include <ATen/ATen.h>

namespace at {
namespace native {

Tensor pool2d(const Tensor& input, IntArrayRef kernel_size, IntArrayRef stride_arg) {
  TORCH_CHECK(kernel_size.size() == 2, "pool2d: kernel_size must have two elements");
  TORCH_CHECK(stride_arg.empty() || stride_arg.size() == 2,
      "pool2d: stride should be omitted or have two elements");
  TORCH_CHECK(!input.is_complex(), "pool2d: input must not be a complex tensor");
  auto out = pool_impl(input, kernel_size, stride_arg);
  return out;
}

Tensor avg_pool(const Tensor& input, int64_t kernel, bool ceil_mode) {
  bool use_fast_path = can_use_fast_path();
  TORCH_CHECK(kernel > 0, "avg_pool: kernel must be positive");
  TORCH_CHECK(input.dim() == 4, "avg_pool: expected a 4D batch of images");
  TORCH_CHECK(use_fast_path, "fast path unavailable on this build");
  return avg_pool_impl(input, kernel, ceil_mode);
}

TORCH_IMPL_FUNC(max_pool_out)(const Tensor& input, int64_t k, const Tensor& output) {
  TORCH_CHECK(k > 0, "max_pool: k must be positive");
  TORCH_CHECK(!input.is_complex(), "max_pool: complex inputs are not supported");
  max_pool_impl(output, input, k);
}

Tensor adaptive_pool(const Tensor& self, IntArrayRef output_size) {
  TORCH_CHECK(output_size.size() == 2, "adaptive_pool: output_size must have two elements");
#ifdef USE_EXTENDED_CHECKS
  TORCH_CHECK(self.dim() == 4, "adaptive_pool: expected a 4D tensor");
#endif
  auto guard = [&]() {
    TORCH_CHECK(!self.is_complex(), "adaptive_pool: complex tensors are not supported");
  };
  guard();
  return adaptive_impl(self, output_size);
}

} // namespace native
} // namespace at
