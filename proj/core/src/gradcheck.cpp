#include "pshape/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pshape {

namespace {

double eval_loss(const TapeLossFn& loss_fn, const ParameterSet& params) {
  Tape tape;
  Tape::NamedVars vars = tape.params(params);
  Tape::Var loss = loss_fn(tape, vars);
  return tape.value(loss).scalar_value();
}

}  // namespace

GradCheckReport finite_diff_check(const TapeLossFn& loss_fn, const ParameterSet& params,
                                  double tolerance, Rng& rng, int64_t min_coords, double step) {
  // Analytic gradients in one backward pass.
  Tape tape;
  Tape::NamedVars vars = tape.params(params);
  Tape::Var loss = loss_fn(tape, vars);
  tape.backward(loss);
  ParameterSet analytic = tape.gradients(vars);

  int64_t total = params.total_size();
  check(total > 0, "finite_diff_check: empty parameter set");
  int64_t want = std::min<int64_t>(total, std::max<int64_t>(min_coords, 1));

  // Distinct flat coordinates across the whole parameter set.
  std::set<int64_t> picked;
  if (want == total) {
    for (int64_t i = 0; i < total; ++i) picked.insert(i);
  } else {
    while (static_cast<int64_t>(picked.size()) < want) picked.insert(rng.uniform_index(total));
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  ParameterSet work = params;
  for (int64_t flat : picked) {
    // locate (parameter, index)
    int64_t offset = flat;
    size_t pi = 0;
    while (offset >= work.items()[pi].second.size()) {
      offset -= work.items()[pi].second.size();
      ++pi;
    }
    auto& [name, tensor] = work.items()[pi];
    double saved = tensor.data[static_cast<size_t>(offset)];

    tensor.data[static_cast<size_t>(offset)] = saved + step;
    double up = eval_loss(loss_fn, work);
    tensor.data[static_cast<size_t>(offset)] = saved - step;
    double down = eval_loss(loss_fn, work);
    tensor.data[static_cast<size_t>(offset)] = saved;

    double numeric = (up - down) / (2.0 * step);
    double a = analytic.at(name).data[static_cast<size_t>(offset)];
    double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
    double rel = std::abs(a - numeric) / denom;
    ++report.coords_checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = name;
      report.worst_index = offset;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace pshape
