#include "lettuce/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

/// Two-pass pooled mean and Bessel-corrected standard deviation.
template <std::size_t N>
void pooled_moments(const std::vector<std::array<double, N>>& samples, std::array<double, N>& mean,
                    std::array<double, N>& std) {
  const auto n = static_cast<double>(samples.size());
  mean.fill(0.0);
  for (const auto& s : samples)
    for (std::size_t c = 0; c < N; ++c) mean[c] += s[c];
  for (double& m : mean) m /= n;

  std.fill(0.0);
  for (const auto& s : samples)
    for (std::size_t c = 0; c < N; ++c) std[c] += (s[c] - mean[c]) * (s[c] - mean[c]);
  for (double& v : std) v = std::max(kStdFloor, std::sqrt(v / (n - 1.0)));
}

template <std::size_t N>
nlohmann::ordered_json to_json_array(const std::array<double, N>& v) {
  auto arr = nlohmann::ordered_json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

template <std::size_t N>
std::array<double, N> array_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j[name].is_array() || j[name].size() != N)
    throw SchemaMismatch(std::string("stats.") + name + ": expected an array of " +
                         std::to_string(N) + " numbers");
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[name][i].is_number())
      throw SchemaMismatch(std::string("stats.") + name + ": non-numeric entry");
    out[i] = j[name][i].get<double>();
  }
  return out;
}

void check_std(const std::span<const double> v, const char* name) {
  for (double s : v)
    if (!(s >= kStdFloor) || !std::isfinite(s))
      throw SchemaMismatch(std::string("stats.") + name + ": standard deviation below floor");
}

}  // namespace

std::array<double, kFeatureWidth> NormStats::feature_mean() const {
  return {mean_x[0], mean_x[1], mean_x[2], mean_x[3], mean_u[0], mean_u[1],
          mean_u[2], mean_d[0], mean_d[1], mean_d[2], mean_d[3]};
}

std::array<double, kFeatureWidth> NormStats::feature_std() const {
  return {std_x[0], std_x[1], std_x[2], std_x[3], std_u[0], std_u[1],
          std_u[2], std_d[0], std_d[1], std_d[2], std_d[3]};
}

StateDerivative fd_target(const GreenhouseState& x_k, const GreenhouseState& x_k1, double h) {
  if (!(h > 0.0)) throw InvalidArgument("fd_target: h must be positive");
  const Vec4 a = x_k.to_array();
  const Vec4 b = x_k1.to_array();
  return {(b[0] - a[0]) / h, (b[1] - a[1]) / h, (b[2] - a[2]) / h, (b[3] - a[3]) / h};
}

NormStats compute_stats(std::span<const Scenario> scenarios, double h) {
  std::vector<Vec4> xs, ds, dxs;
  std::vector<Vec3> us;
  for (const auto& s : scenarios) {
    if (s.states.size() != s.steps() + 1 || s.disturbances.size() != s.steps())
      throw LengthMismatch("scenario " + std::to_string(s.index) + " has inconsistent lengths");
    for (std::size_t k = 0; k < s.steps(); ++k) {
      xs.push_back(s.states[k].to_array());
      us.push_back(s.controls[k].to_array());
      ds.push_back(s.disturbances[k].to_array());
      dxs.push_back(fd_target(s.states[k], s.states[k + 1], h));
    }
  }
  if (xs.size() < 2)
    throw InsufficientData("compute_stats: need at least two usable steps, found " +
                           std::to_string(xs.size()));

  NormStats st;
  pooled_moments(xs, st.mean_x, st.std_x);
  pooled_moments(us, st.mean_u, st.std_u);
  pooled_moments(ds, st.mean_d, st.std_d);
  pooled_moments(dxs, st.mean_dx, st.std_dx);
  return st;
}

std::array<double, kFeatureWidth> make_feature(const GreenhouseState& x, const ControlInput& u,
                                               const Disturbance& d, const NormStats& stats) {
  const Vec4 xn = normalize(x.to_array(), stats.mean_x, stats.std_x);
  const Vec3 un = normalize(u.to_array(), stats.mean_u, stats.std_u);
  const Vec4 dn = normalize(d.to_array(), stats.mean_d, stats.std_d);
  return {xn[0], xn[1], xn[2], xn[3], un[0], un[1], un[2], dn[0], dn[1], dn[2], dn[3]};
}

Dataset::Dataset(std::vector<double> features, std::vector<double> targets, NormStats stats,
                 std::vector<RowId> row_index)
    : features_(std::move(features)),
      targets_(std::move(targets)),
      stats_(stats),
      row_index_(std::move(row_index)) {
  if (features_.size() != row_index_.size() * kFeatureWidth ||
      targets_.size() != row_index_.size() * kTargetWidth)
    throw LengthMismatch("dataset matrices do not match the row index");
}

Dataset build_matrices(std::span<const Scenario> scenarios, const NormStats& stats, double h) {
  if (scenarios.empty()) throw InsufficientData("build_matrices: no scenarios");

  std::vector<double> features, targets;
  std::vector<Dataset::RowId> rows;
  for (std::size_t j = 0; j < scenarios.size(); ++j) {
    const Scenario& s = scenarios[j];
    for (std::size_t k = 0; k < s.steps(); ++k) {
      const auto f = make_feature(s.states[k], s.controls[k], s.disturbances[k], stats);
      const Vec4 t =
          normalize(fd_target(s.states[k], s.states[k + 1], h), stats.mean_dx, stats.std_dx);
      for (double v : f) {
        if (!std::isfinite(v)) throw InvalidArgument("build_matrices: non-finite feature");
        features.push_back(v);
      }
      for (double v : t) {
        if (!std::isfinite(v)) throw InvalidArgument("build_matrices: non-finite target");
        targets.push_back(v);
      }
      rows.push_back({s.index, k});
    }
  }
  if (rows.empty()) throw InsufficientData("build_matrices: scenarios contain no steps");
  return Dataset(std::move(features), std::move(targets), stats, std::move(rows));
}

nlohmann::ordered_json stats_to_json(const NormStats& s) {
  nlohmann::ordered_json j;
  j["mean_x"] = to_json_array(s.mean_x);
  j["std_x"] = to_json_array(s.std_x);
  j["mean_u"] = to_json_array(s.mean_u);
  j["std_u"] = to_json_array(s.std_u);
  j["mean_d"] = to_json_array(s.mean_d);
  j["std_d"] = to_json_array(s.std_d);
  j["mean_dx"] = to_json_array(s.mean_dx);
  j["std_dx"] = to_json_array(s.std_dx);
  return j;
}

NormStats stats_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaMismatch("stats: expected an object");
  NormStats s;
  s.mean_x = array_field<4>(j, "mean_x");
  s.std_x = array_field<4>(j, "std_x");
  s.mean_u = array_field<3>(j, "mean_u");
  s.std_u = array_field<3>(j, "std_u");
  s.mean_d = array_field<4>(j, "mean_d");
  s.std_d = array_field<4>(j, "std_d");
  s.mean_dx = array_field<4>(j, "mean_dx");
  s.std_dx = array_field<4>(j, "std_dx");
  check_std(s.std_x, "std_x");
  check_std(s.std_u, "std_u");
  check_std(s.std_d, "std_d");
  check_std(s.std_dx, "std_dx");
  return s;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  std::ofstream features(dir / "features.csv");
  std::ofstream targets(dir / "targets.csv");
  std::ofstream stats(dir / "stats.json");
  if (!features || !targets || !stats) throw IoError("cannot write dataset in " + dir.string());

  features << "scenario,step,x1,x2,x3,x4,u1,u2,u3,d1,d2,d3,d4\n";
  targets << "scenario,step,dx1,dx2,dx3,dx4\n";
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const auto id = dataset.row_index()[i];
    features << id.scenario << ',' << id.step;
    for (double v : dataset.feature_row(i)) features << ',' << format_double(v);
    features << '\n';
    targets << id.scenario << ',' << id.step;
    for (double v : dataset.target_row(i)) targets << ',' << format_double(v);
    targets << '\n';
  }
  stats << stats_to_json(dataset.stats()).dump(2) << '\n';
}

}  // namespace lettuce
