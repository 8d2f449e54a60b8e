#include <fstream>
#include <iomanip>

#include "cbo/acquisition.hpp"
#include "cbo/decoupled.hpp"
#include "cbo/errors.hpp"
#include "cbo/run_config.hpp"

namespace cbo {
namespace {

namespace fs = std::filesystem;

void write_csv(const fs::path& path, const Eigen::MatrixXd& xs, const Eigen::VectorXd& values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "x1,x2,value\n";
  for (Eigen::Index i = 0; i < xs.rows(); ++i) out << xs(i, 0) << ',' << xs(i, 1) << ',' << values(i) << '\n';
}

}  // namespace

std::vector<fs::path> emit_surfaces(const Optimizer& optimizer, int resolution, const fs::path& out_dir) {
  const Box& box = optimizer.problem().bounds;
  if (box.dim() != 2) throw InputError("surfaces: only 2D problems can be gridded");
  if (resolution < 2) throw InputError("surfaces: resolution must be at least 2");
  fs::create_directories(out_dir);

  // Row-major over x1, x2 varying fastest; grid includes both box edges.
  const Eigen::Index n = static_cast<Eigen::Index>(resolution) * resolution;
  Eigen::MatrixXd unit(n, 2), original(n, 2);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * resolution + j;
      unit(r, 0) = static_cast<double>(i) / (resolution - 1);
      unit(r, 1) = static_cast<double>(j) / (resolution - 1);
      original.row(r) = box.from_unit(unit.row(r).transpose()).transpose();
    }

  std::vector<fs::path> written;
  const GaussianModel& obj = optimizer.objective_model();
  const double members = static_cast<double>(obj.members());
  Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(n), second = Eigen::VectorXd::Zero(n), m, v;
  for (size_t k = 0; k < obj.members(); ++k) {
    obj.predict_batch(k, unit, m, v);
    mean_sum += m;
    second += v + m.cwiseAbs2();
  }
  const Eigen::VectorXd mean = mean_sum / members;
  const Eigen::VectorXd variance = (second / members - mean.cwiseAbs2()).cwiseMax(0.0);
  written.push_back(out_dir / "objective_mean.csv");
  write_csv(written.back(), original, mean);
  written.push_back(out_dir / "objective_variance.csv");
  write_csv(written.back(), original, variance);

  for (size_t k = 0; k < optimizer.constraint_count(); ++k) {
    const ConstraintModel& c = optimizer.constraint_model(k);
    if (!c.fitted()) continue;
    const Eigen::VectorXd p = c.probability_batch(unit);
    Eigen::VectorXd indicator(n);
    for (Eigen::Index i = 0; i < n; ++i) indicator(i) = meets_confidence(p(i), c.spec().delta) ? 1.0 : 0.0;
    written.push_back(out_dir / ("probability_" + c.spec().id + ".csv"));
    write_csv(written.back(), original, p);
    written.push_back(out_dir / ("indicator_" + c.spec().id + ".csv"));
    write_csv(written.back(), original, indicator);
  }

  const AcquisitionSnapshot snap = optimizer.snapshot();
  written.push_back(out_dir / "acquisition.csv");
  write_csv(written.back(), original, acquisition_batch(snap, unit));

  // p_min lives on its own discretization rather than the grid.
  const SelectionSettings& sel = optimizer.settings().selection;
  Rng rng = Rng(static_cast<std::uint64_t>(optimizer.iteration())).child({0x5f});
  const Eigen::MatrixXd points = build_discretization(snap, sel.discretization, rng, sel.scan_points);
  const PminEstimate est = estimate_pmin(snap, points, sel.samples, rng);
  Eigen::MatrixXd points_original(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    points_original.row(i) = box.from_unit(points.row(i).transpose()).transpose();
  written.push_back(out_dir / "pmin.csv");
  write_csv(written.back(), points_original, est.mass);
  {
    written.push_back(out_dir / "pmin_summary.json");
    std::ofstream out(written.back());
    out << nlohmann::json{{"points", points.rows()},
                          {"infeasible_mass", est.infeasible_mass},
                          {"entropy", entropy(est)}}
               .dump(2)
        << "\n";
  }
  return written;
}

}  // namespace cbo
