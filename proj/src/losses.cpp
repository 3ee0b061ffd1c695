#include "texweave/losses.hpp"

namespace texweave {

void LossWeights::validate() const {
  if (lambda_cyc < 0 || lambda_sp < 0 || alpha < 0 || beta < 0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (!(alpha < 1) || !(beta < 1)) throw std::invalid_argument("alpha and beta must be < 1");
}

LossBreakdown total_generator_loss(const LossBreakdown& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {{"gan_g", c.gan_g}, {"gan_f", c.gan_f}, {"cyc", c.cyc}, {"sp", c.sp}};
  for (const auto& [name, v] : parts)
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite loss component: ") + name);
  LossBreakdown out = c;
  out.total = c.gan_g + c.gan_f + w.lambda_cyc * c.cyc + w.lambda_sp * c.sp;
  return out;
}

}  // namespace texweave
