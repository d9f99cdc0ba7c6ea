#include <ATen/ATen.h>

namespace at {
namespace native {

Tensor cholesky(const Tensor& self, bool upper) {
  TORCH_CHECK(self.dim() == 2, "cholesky: input must be a matrix");
  TORCH_CHECK(self.size(0) == self.size(1), "cholesky: input must be square");
  return cholesky_stub(self, upper);
}

std::tuple<Tensor, Tensor> qr_helper(const Tensor& input, std::string mode) {
  TORCH_CHECK(mode == "reduced" || mode == "complete", "qr: unknown mode");
  TORCH_CHECK(input.dim() >= 2, "qr: input must have at least two dimensions");
  return qr_stub(input, mode);
}

Tensor solve_triangular(const Tensor& self, const Tensor& other, bool unitriangular) {
  TORCH_CHECK(self.dim() == 2, "solve_triangular: self must be a matrix");
  TORCH_CHECK(other.dim() >= 1, "solve_triangular: other must be at least 1D");
  TORCH_CHECK(self.size(-1) >= other.size(-1),
      "solve_triangular: self must cover other's last dimension");
  return solve_stub(self, other, unitriangular);
}

Tensor lonely_helper() {
  TORCH_CHECK(global_state_ready(), "backend not initialized");
  return make_empty();
}

} // namespace native
} // namespace at
