#include "osciguard/grid/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>

#include "osciguard/core/errors.hpp"

namespace osciguard::grid {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Laplacian over named nodes from a branch reactance list.
struct NetBuilder {
  std::vector<std::string> nodes;
  Mat lap;

  explicit NetBuilder(std::vector<std::string> n)
      : nodes(std::move(n)), lap(Mat::Zero(nodes.size(), nodes.size())) {}

  int idx(const std::string& n) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == n) return static_cast<int>(i);
    throw UsageError("unknown node " + n);
  }

  void branch(const std::string& a, const std::string& b, double x_pu) {
    const double s = 1.0 / x_pu;
    const int i = idx(a), j = idx(b);
    lap(i, i) += s;
    lap(j, j) += s;
    lap(i, j) -= s;
    lap(j, i) -= s;
  }

  // Schur complement eliminating every node not in keep (in keep order).
  Mat reduce(const std::vector<std::string>& keep) const {
    std::vector<int> k, e;
    for (const auto& n : keep) k.push_back(idx(n));
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (std::find(k.begin(), k.end(), static_cast<int>(i)) == k.end())
        e.push_back(static_cast<int>(i));
    Mat lkk = lap(k, k), lke = lap(k, e), lee = lap(e, e);
    return lkk - lke * lee.ldlt().solve(lke.transpose().eval());
  }
};

GridModel wscc9() {
  GridModel m;
  m.name = "wscc9";
  m.base_mva = 100.0;
  m.nominal_freq_hz = 60.0;
  m.gens = {
      {"G1", 247.5, 23.64, 2.0, 0.05, 0.5, 5, 71.6},
      {"G2", 192.0, 6.40, 2.0, 0.05, 0.5, 5, 163.0},
      {"G3", 128.0, 3.01, 2.0, 0.05, 0.5, 8, 85.0},
  };
  m.buses = {{5, 125.0}, {6, 90.0}, {8, 100.0}};

  // Classic 9-bus branch reactances; machine internal node reaches its
  // terminal through x'd plus the step-up transformer.
  NetBuilder net({"G1", "G2", "G3", "b4", "b5", "b6", "b7", "b8", "b9"});
  net.branch("G1", "b4", 0.0608 + 0.0576);
  net.branch("G2", "b7", 0.1198 + 0.0625);
  net.branch("G3", "b9", 0.1813 + 0.0586);
  net.branch("b4", "b5", 0.085);
  net.branch("b4", "b6", 0.092);
  net.branch("b5", "b7", 0.161);
  net.branch("b6", "b9", 0.170);
  net.branch("b7", "b8", 0.072);
  net.branch("b8", "b9", 0.1008);

  const Mat red = net.reduce({"G1", "G2", "G3", "b5", "b6", "b8"});
  m.coupling.resize(static_cast<std::size_t>(red.rows()) * red.cols());
  for (int r = 0; r < red.rows(); ++r)
    for (int c = 0; c < red.cols(); ++c)
      m.coupling[static_cast<std::size_t>(r) * red.cols() + c] = red(r, c);
  return m;
}

GridModel ne39_reduced() {
  GridModel m;
  m.name = "ne39-reduced";
  m.base_mva = 100.0;
  m.nominal_freq_hz = 60.0;
  const double h[10] = {500.0, 30.3, 35.8, 28.6, 26.0, 34.8, 26.4, 24.3, 34.5, 42.0};
  const double xd[10] = {0.006, 0.0697, 0.0531, 0.0436, 0.132,
                         0.05,  0.049,  0.057,  0.057,  0.031};
  const double disp[10] = {1000.0, 520.8, 650.0, 632.0, 508.0,
                           650.0,  560.0, 540.0, 830.0, 250.0};
  const double load[10] = {1104.1, 600.0, 680.0, 574.0, 522.0,
                           650.0,  560.0, 540.0, 617.0, 250.0};
  std::vector<std::string> names;
  for (int i = 0; i < 10; ++i) {
    m.gens.push_back({"G" + std::to_string(i + 1), 1000.0, h[i], 2.0, 0.05, 0.5,
                      100 + i, disp[i]});
    m.buses.push_back({100 + i, load[i]});
    names.push_back("G" + std::to_string(i + 1));
  }
  for (int i = 0; i < 10; ++i) names.push_back("b" + std::to_string(100 + i));

  // One aggregate area bus per machine, ring plus a few chords.
  NetBuilder net(names);
  for (int i = 0; i < 10; ++i)
    net.branch("G" + std::to_string(i + 1), "b" + std::to_string(100 + i), xd[i] + 0.02);
  for (int i = 0; i < 10; ++i)
    net.branch("b" + std::to_string(100 + i), "b" + std::to_string(100 + (i + 1) % 10), 0.025);
  net.branch("b100", "b104", 0.04);
  net.branch("b101", "b106", 0.04);
  net.branch("b102", "b108", 0.04);

  m.coupling.resize(400);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) m.coupling[static_cast<std::size_t>(r) * 20 + c] = net.lap(r, c);
  return m;
}

}  // namespace

int GridModel::bus_index(int bus_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  return -1;
}

double GridModel::total_load_mw() const {
  double s = 0.0;
  for (const auto& b : buses) s += b.nominal_load_mw;
  return s;
}

GridModel build_grid(const std::string& topology) {
  GridModel m;
  if (topology == "wscc9") {
    m = wscc9();
  } else if (topology == "ne39-reduced") {
    m = ne39_reduced();
  } else {
    throw UsageError("unknown grid topology '" + topology + "'");
  }
  finalize_model(m);
  return m;
}

GridModel build_grid_from_json(const nlohmann::json& cfg) {
  GridModel m;
  try {
    m.name = cfg.value("name", "custom");
    m.base_mva = cfg.value("base_mva", 100.0);
    m.nominal_freq_hz = cfg.value("nominal_freq_hz", 60.0);
    m.trip_threshold_pu = cfg.value("trip_threshold_pu", 0.05);
    for (const auto& g : cfg.at("generators")) {
      GeneratorParams p;
      p.id = g.value("id", "G");
      p.rated_mva = g.value("rated_mva", 100.0);
      p.inertia_h_s = g.at("inertia_h_s").get<double>();
      p.damping_d_pu = g.value("damping_d_pu", 2.0);
      p.droop_r_pu = g.value("droop_r_pu", 0.05);
      p.governor_t_s = g.value("governor_t_s", 0.5);
      p.bus_id = g.at("bus_id").get<int>();
      p.dispatch_mw = g.at("dispatch_mw").get<double>();
      m.gens.push_back(p);
    }
    for (const auto& b : cfg.at("buses"))
      m.buses.push_back({b.at("id").get<int>(), b.at("nominal_load_mw").get<double>()});
    m.coupling = cfg.at("coupling").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad grid config: ") + e.what());
  }
  finalize_model(m);
  return m;
}

void finalize_model(GridModel& m) {
  const int g = m.n_gens(), b = m.n_buses(), n = g + b;
  if (g < 1 || b < 1) throw UsageError("grid needs at least one generator and one bus");
  if (static_cast<int>(m.coupling.size()) != n * n)
    throw UsageError("coupling matrix size does not match node count");
  for (const auto& gen : m.gens) {
    if (gen.inertia_h_s <= 0 || gen.droop_r_pu <= 0 || gen.governor_t_s <= 0 ||
        gen.damping_d_pu < 0)
      throw UsageError("generator " + gen.id + " has non-physical constants");
    if (m.bus_index(gen.bus_id) < 0)
      throw UsageError("generator " + gen.id + " references unknown bus");
  }

  Mat L(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) L(r, c) = m.coupling[static_cast<std::size_t>(r) * n + c];

  const double tol = 1e-9 * std::max(1.0, L.cwiseAbs().maxCoeff());
  if (!L.isApprox(L.transpose(), 1e-9)) throw UsageError("coupling matrix is not symmetric");
  for (int r = 0; r < n; ++r)
    if (std::abs(L.row(r).sum()) > tol) throw UsageError("coupling row sums are not zero");
  Eigen::SelfAdjointEigenSolver<Mat> es(L);
  if (es.eigenvalues().minCoeff() < -tol)
    throw UsageError("coupling matrix is not positive semi-definite");

  const Mat lgg = L.topLeftCorner(g, g), lgb = L.topRightCorner(g, b);
  const Mat lbg = L.bottomLeftCorner(b, g), lbb = L.bottomRightCorner(b, b);
  const auto lbb_lu = lbb.partialPivLu();

  // theta = W*delta - lbb^-1 * load_pu, so W holds each bus's electrical
  // proximity to each machine. Rows of W sum to one on a connected network.
  const Mat W = lbb_lu.solve(-lbg);
  const Mat kdd = lgg + lgb * W;
  const Mat kdp = -(lgb * lbb_lu.solve(Mat::Identity(b, b)));
  for (int r = 0; r < b; ++r) {
    if (std::abs(W.row(r).sum() - 1.0) > 1e-6)
      throw UsageError("bus weight rows do not sum to one (network disconnected?)");
    for (int c = 0; c < g; ++c)
      if (W(r, c) < -1e-9) throw UsageError("negative electrical-distance weight");
  }

  m.weights.resize(static_cast<std::size_t>(b) * g);
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < g; ++c) m.weights[static_cast<std::size_t>(r) * g + c] = W(r, c);
  m.kdd.resize(static_cast<std::size_t>(g) * g);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) m.kdd[static_cast<std::size_t>(r) * g + c] = kdd(r, c);
  m.kdp.resize(static_cast<std::size_t>(g) * b);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < b; ++c) m.kdp[static_cast<std::size_t>(r) * b + c] = kdp(r, c);

  // Balance dispatch against nominal load (lossless DC), then solve the full
  // flow for equilibrium angles with node 0 as reference.
  double disp = 0.0;
  for (const auto& gen : m.gens) disp += gen.dispatch_mw;
  if (disp <= 0) throw UsageError("total dispatch must be positive");
  const double scale = m.total_load_mw() / disp;
  for (auto& gen : m.gens) gen.dispatch_mw *= scale;

  Vec inj(n);
  for (int i = 0; i < g; ++i) inj[i] = m.gens[i].dispatch_mw / m.base_mva;
  for (int i = 0; i < b; ++i) inj[g + i] = -m.buses[i].nominal_load_mw / m.base_mva;
  Vec phi = Vec::Zero(n);
  phi.tail(n - 1) = L.bottomRightCorner(n - 1, n - 1).partialPivLu().solve(inj.tail(n - 1));

  m.delta0.assign(phi.data(), phi.data() + g);
  m.theta0.assign(phi.data() + g, phi.data() + n);
  m.pm0_pu.resize(g);
  for (int i = 0; i < g; ++i) m.pm0_pu[i] = inj[i];
}

}  // namespace osciguard::grid
