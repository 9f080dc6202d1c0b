#include "repmtl/tl.hpp"

#include "repmtl/mtl.hpp"

namespace repmtl {

TlFit rl_tl(const TaskData& target, const ModelFamily& family, const OrthoBasis& center,
            double gamma) {
  if (target.p() != center.p()) throw ShapeError("rl_tl: target p differs from center p");
  if (!(gamma >= 0.0)) throw InvalidArgument("rl_tl: gamma must be >= 0");
  TlFit fit;
  fit.theta0 = restricted_fit(family, target, center);
  fit.step1_beta0 = center.matrix() * fit.theta0;
  // fit_step2 scales its penalty by the sample size of the data it is given,
  // which here is n0.
  fit.beta0 = fit_step2(target, family, gamma, fit.step1_beta0);
  return fit;
}

}  // namespace repmtl
