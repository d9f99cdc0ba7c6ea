#include <ATen/ATen.h>

namespace at {
namespace native {

Tensor tricky_lambda(const Tensor& grad, int64_t n) {
  TORCH_CHECK(!grad.is_complex(), "tricky_lambda: complex grads unsupported");
  auto validate = [&](int64_t bound) {
    TORCH_CHECK(n <= bound, "tricky_lambda: n exceeds the bound");
    TORCH_CHECK(bound_ok(bound), "tricky_lambda: bad bound");
  };
  validate(128);
  return grad;
}

} // namespace native
} // namespace at
