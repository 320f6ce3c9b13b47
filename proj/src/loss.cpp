#include "patcnn/loss.hpp"

namespace patcnn {

std::string_view to_string(LossVariant v) {
  return v == LossVariant::AsWritten ? "as-written" : "full-bce";
}

LossVariant parse_loss_variant(std::string_view s) {
  if (s == "as-written") return LossVariant::AsWritten;
  if (s == "full-bce") return LossVariant::FullBce;
  throw DomainError("unknown loss variant '" + std::string(s) + "' (expected as-written or full-bce)");
}

namespace detail {

void check_loss_inputs(std::size_t n_pred, std::size_t n_target, const LossConfig& cfg) {
  if (n_pred != n_target) throw DomainError("combined_loss: prediction and target lengths differ");
  if (n_pred == 0) throw DomainError("combined_loss: empty input");
  if (!(cfg.epsilon > 0)) throw DomainError("combined_loss: epsilon must be positive");
}

void throw_loss_range(const char* what) { throw DomainError(std::string("combined_loss: ") + what); }

}  // namespace detail
}  // namespace patcnn
