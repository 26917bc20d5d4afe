#include "uird/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "uird/error.hpp"

namespace uird::nn {
namespace {

double evaluate(const std::function<Var(Tape&)>& loss) {
  Tape tape;
  return loss(tape).value()[0];
}

}  // namespace

GradCheckReport finite_diff_check(ParameterSet params, const std::function<Var(Tape&)>& loss,
                                  const GradCheckOptions& options,
                                  const std::function<void(ParameterSet&)>& tamper) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  if (tamper) tamper(params);

  struct Entry {
    std::size_t param, index;
  };
  std::vector<Entry> entries;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    for (std::size_t i = 0; i < params[p].value.size(); ++i) entries.push_back({p, i});
  }
  if (entries.empty()) fail(ErrorKind::Validation, "finite_diff_check: no trainable entries");
  if (entries.size() > options.min_samples) {
    Rng rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(options.min_samples);
  }

  GradCheckReport report;
  report.passed = true;
  for (const Entry& e : entries) {
    Parameter& p = params[e.param];
    const double analytic = p.grad[e.index];
    const double saved = p.value[e.index];
    p.value[e.index] = saved + options.step;
    const double up = evaluate(loss);
    p.value[e.index] = saved - options.step;
    const double down = evaluate(loss);
    p.value[e.index] = saved;

    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), options.floor});
    const double rel = std::fabs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = rel;
      report.worst_parameter = p.name;
      report.worst_index = e.index;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace uird::nn
