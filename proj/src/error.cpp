#include "scaleforge/error.hpp"

namespace scaleforge {
namespace {

std::string summarize(const std::vector<Violation>& violations) {
    std::string msg = std::to_string(violations.size()) + " validation error(s)";
    for (const auto& v : violations) {
        msg += "; ";
        msg += v.image_id.empty() ? std::string("<bundle>") : v.image_id;
        msg += ": " + v.rule;
    }
    return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(summarize(violations)), violations_(std::move(violations)) {}

}  // namespace scaleforge
