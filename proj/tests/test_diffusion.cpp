#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <set>

#include "netgraph/diffusion.hpp"

using namespace netgraph;

namespace {

MetricGraph single_edge() { return build_graph_uniform(2, {{1, 0}}); }

// head-to-head 2-path: both edges enter the shared vertex 1
MetricGraph two_path() { return build_graph_uniform(3, {{0, 1}, {2, 1}}); }

MetricGraph three_star() {
  return build_graph_uniform(4, {{1, 0}, {2, 0}, {3, 0}});
}

std::optional<MetricGraph> random_graph(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Edge> edges;
  std::set<std::pair<int, int>> used;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      std::pair<int, int> key = std::minmax(a, b);
      if (used.count(key)) continue;
      if (coin(rng) < 0.5) {
        used.insert(key);
        edges.push_back(coin(rng) < 0.5 ? Edge{b, a} : Edge{a, b});
      }
    }
  if (edges.empty()) return std::nullopt;
  try {
    return build_graph_uniform(n, edges);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

// matrix exponential through the eigendecomposition; independent of the
// time steppers
Vector expm_apply(const Matrix& A, const Vector& u0, double T) {
  Eigen::EigenSolver<Matrix> es(A);
  REQUIRE(es.info() == Eigen::Success);
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd lam = es.eigenvalues();
  Eigen::VectorXcd c = V.lu().solve(u0.cast<std::complex<double>>());
  for (int i = 0; i < lam.size(); ++i) c[i] *= std::exp(lam[i] * T);
  return (V * c).real();
}

}  // namespace

TEST_CASE("generator structure: kernel, conservation, sign pattern",
          "[diffusion][property]") {
  std::mt19937 rng(62626u);
  std::uniform_real_distribution<double> unif(0.3, 2.5);
  int tested = 0;
  while (tested < 15) {
    auto og = random_graph(rng, 3 + static_cast<int>(rng() % 3));
    if (!og) continue;
    const MetricGraph& g = *og;
    ++tested;

    // kernel and the sign pattern hold for any positive coefficient
    std::vector<std::vector<double>> tables(g.m());
    for (auto& t : tables) t = {unif(rng), unif(rng), unif(rng)};
    CoefficientField a = CoefficientField::tabulated(tables);
    DiscreteGenerator gen = assemble_standard(g, a, 4 + static_cast<int>(rng() % 5));
    Matrix A = Matrix(gen.A);
    const double scale = A.cwiseAbs().maxCoeff();
    CHECK((A * Vector::Ones(gen.dim)).cwiseAbs().maxCoeff() < 1e-13 * scale);
    for (int i = 0; i < gen.dim; ++i)
      for (int j = 0; j < gen.dim; ++j)
        if (i != j) CHECK(A(i, j) >= 0.0);

    // exact conservation and weighted symmetry need edgewise-constant a
    std::vector<double> flat(g.m());
    for (double& v : flat) v = unif(rng);
    DiscreteGenerator genc =
        assemble_standard(g, CoefficientField::per_edge(flat), 4 + static_cast<int>(rng() % 5));
    Matrix Ac = Matrix(genc.A);
    const double scalec = Ac.cwiseAbs().maxCoeff();
    CHECK((genc.mass_w.transpose() * Ac).cwiseAbs().maxCoeff() < 1e-13 * scalec);
    Matrix W = genc.mass_w.asDiagonal() * Ac;
    CHECK((W - W.transpose()).cwiseAbs().maxCoeff() < 1e-12 * scalec);
  }
}

TEST_CASE("interior rows apply a(s) u'' at second order", "[diffusion]") {
  // variable coefficient stays outside the derivative: the row at node i must
  // approximate a(s_i) u''(s_i), not (a u')'(s_i)
  MetricGraph g = single_edge();
  auto worst = [&](int N) {
    CoefficientField a =
        CoefficientField::tabulated({{0.5, 2.0, 0.8, 1.4, 1.1}});  // piecewise linear
    DiscreteGenerator gen = assemble_standard(g, a, N);
    auto f = [](double s) { return std::cos(2.2 * s) + 0.3 * s * s * s; };
    auto fpp = [](double s) { return -2.2 * 2.2 * std::cos(2.2 * s) + 1.8 * s; };
    Vector u(gen.dim);
    u[gen.idx_vertex(g.edges[0].v0)] = f(0.0);
    u[gen.idx_vertex(g.edges[0].v1)] = f(1.0);
    for (int i = 1; i < N; ++i) u[gen.idx_interior(0, i)] = f(i * gen.dx[0]);
    Vector Au = gen.A * u;
    double err = 0.0;
    for (int i = 1; i < N; ++i) {
      const double s = i * gen.dx[0];
      err = std::max(err, std::abs(Au[gen.idx_interior(0, i)] - a.at(0, s) * fpp(s)));
    }
    return err;
  };
  const double e16 = worst(16), e32 = worst(32), e64 = worst(64);
  CHECK(e32 < 0.35 * e16);
  CHECK(e64 < 0.35 * e32);
}

TEST_CASE("single-edge spectrum matches the closed form", "[diffusion]") {
  const int N = 16;
  DiscreteGenerator gen =
      assemble_standard(single_edge(), CoefficientField::constant(1, 1.0), N);
  REQUIRE(gen.dim == N + 1);
  Matrix A = Matrix(gen.A);
  Eigen::EigenSolver<Matrix> es(A, false);
  REQUIRE(es.info() == Eigen::Success);
  std::vector<double> got(N + 1);
  for (int i = 0; i <= N; ++i) got[i] = es.eigenvalues()[i].real();
  std::sort(got.begin(), got.end());

  const double dx = 1.0 / N;
  std::vector<double> expect(N + 1);
  for (int k = 0; k <= N; ++k) {
    double s = std::sin(k * M_PI * dx / 2.0);
    expect[k] = -4.0 / (dx * dx) * s * s;
  }
  std::sort(expect.begin(), expect.end());
  for (int k = 0; k <= N; ++k)
    CHECK(got[k] == Catch::Approx(expect[k]).margin(1e-8 * 4.0 / (dx * dx)));
}

TEST_CASE("time steppers agree with the eigendecomposition", "[diffusion]") {
  MetricGraph g = three_star();
  CoefficientField a = CoefficientField::per_edge({1.0, 2.0, 0.5});
  DiscreteGenerator gen = assemble_standard(g, a, 8);
  auto f = [](int j, double s) { return 1.0 + 0.5 * std::cos(M_PI * s) + 0.2 * j; };
  Vector u0 = sample_standard(gen, g, f);
  Vector exact = expm_apply(Matrix(gen.A), u0, 0.05);

  Vector be = evolve_diffusion(gen, u0, 0.05, 1e-5, Scheme::BackwardEuler);
  Vector tr = evolve_diffusion(gen, u0, 0.05, 1e-4, Scheme::Trapezoidal);
  CHECK((be - exact).cwiseAbs().maxCoeff() < 5e-3);
  CHECK((tr - exact).cwiseAbs().maxCoeff() < 1e-4);
  // trapezoidal at the same step is far more accurate than backward Euler
  Vector be2 = evolve_diffusion(gen, u0, 0.05, 1e-4, Scheme::BackwardEuler);
  CHECK((tr - exact).cwiseAbs().maxCoeff() <
        0.1 * (be2 - exact).cwiseAbs().maxCoeff());
}

TEST_CASE("backward Euler conserves mass exactly and preserves positivity",
          "[diffusion]") {
  MetricGraph g = three_star();
  CoefficientField a = CoefficientField::per_edge({1.0, 3.0, 0.7});
  DiscreteGenerator gen = assemble_standard(g, a, 12);
  auto f = [](int j, double s) {
    return (j == 0) ? std::max(0.0, 1.0 - 4.0 * s * s) : 0.0;  // hat on edge 0
  };
  Vector u = sample_standard(gen, g, f);
  const double m0 = gen.mass_w.dot(u);
  REQUIRE(m0 > 0.0);

  DiffusionStepper st(gen, 1e-3);
  for (int k = 0; k < 500; ++k) {
    u = st.step(u);
    CHECK(u.minCoeff() >= -1e-12);
  }
  CHECK(std::abs(gen.mass_w.dot(u) - m0) < 1e-12 * m0);
}

TEST_CASE("two-path cosine mode decays at the exact rate, order 2",
          "[diffusion]") {
  // u(x) = cos(pi x / 2) on the doubled interval is an eigenfunction with
  // rate -(pi/2)^2; edge 0 carries x = s, edge 1 carries x = 2 - s.
  auto run = [&](int N) {
    MetricGraph g = two_path();
    DiscreteGenerator gen =
        assemble_standard(g, CoefficientField::constant(2, 1.0), N);
    auto f = [](int j, double s) {
      double x = (j == 0) ? s : 2.0 - s;
      return std::cos(M_PI * x / 2.0);
    };
    Vector u0 = sample_standard(gen, g, f);
    const double T = 0.1;
    Vector u = evolve_diffusion(gen, u0, T, 2e-4, Scheme::Trapezoidal);
    Vector exact = std::exp(-(M_PI / 2.0) * (M_PI / 2.0) * T) * u0;
    return (u - exact).cwiseAbs().maxCoeff();
  };
  const double e16 = run(16), e32 = run(32);
  CHECK(e16 < 1e-3);
  const double ratio = e16 / e32;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("diffusion equilibrates to the mass-projected constant", "[diffusion]") {
  MetricGraph g = three_star();
  CoefficientField a = CoefficientField::constant(3, 1.0);
  DiscreteGenerator gen = assemble_standard(g, a, 16);
  EquilibriumProjection pi = equilibrium(gen);

  // right kernel is constant, left kernel is the mass functional
  CHECK((pi.right.array() / pi.right[0] - 1.0).abs().maxCoeff() < 1e-10);
  Vector l_norm = pi.left / pi.left.sum();
  Vector m_norm = gen.mass_w / gen.mass_w.sum();
  CHECK((l_norm - m_norm).cwiseAbs().maxCoeff() < 1e-10);

  auto f = [](int j, double s) { return 0.2 + s * s + 0.3 * (j == 1); };
  Vector u0 = sample_standard(gen, g, f);
  Vector uT = evolve_diffusion(gen, u0, 6.0, 1e-3);
  Vector limit = pi.apply(u0);
  CHECK((uT - limit).cwiseAbs().maxCoeff() < 1e-5);
  // the projection preserves mass
  CHECK(gen.mass_w.dot(limit) == Catch::Approx(gen.mass_w.dot(u0)).epsilon(1e-12));
}

TEST_CASE("vertex flux defect shrinks at second order", "[diffusion]") {
  auto defect = [&](int N) {
    MetricGraph g = three_star();
    CoefficientField a = CoefficientField::constant(3, 1.0);
    DiscreteGenerator gen = assemble_standard(g, a, N);
    auto f = [](int j, double s) { return std::exp(-s) + 0.5 * j * s * s; };
    Vector u = sample_standard(gen, g, f);
    u = evolve_diffusion(gen, u, 0.02, 1e-5, Scheme::Trapezoidal);
    return residuals_standard(gen, g, a, u).vertex_flux_defect;
  };
  const double d8 = defect(8), d16 = defect(16);
  CHECK(d16 < 0.6 * d8);  // clean O(dx^2) behavior is checked loosely
}

TEST_CASE("Robin assembly matches a hand computation", "[diffusion]") {
  // one edge, two cells, a = 1, K = [[-1, 0.5], [0.25, -2]]
  Matrix K(2, 2);
  K << -1.0, 0.5, 0.25, -2.0;
  DiscreteGenerator gen = assemble_robin(CoefficientField::constant(1, 1.0), K, 2);
  REQUIRE(gen.dim == 3);
  Matrix A = Matrix(gen.A);
  Matrix expect(3, 3);
  // rows: V0, interior, V1 (dx = 1/2)
  expect << -8.0 - 4.0 * (-1.0), 8.0, -4.0 * 0.5,
            4.0, -8.0, 4.0,
            4.0 * 0.25, 8.0, -8.0 + 4.0 * (-2.0);
  CHECK((A - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Robin with zero coupling is pure Neumann per edge", "[diffusion]") {
  CoefficientField a = CoefficientField::per_edge({1.0, 0.5});
  DiscreteGenerator gen = assemble_robin(a, Matrix::Zero(4, 4), 8);
  auto f = [](int j, double s) { return std::cos(M_PI * s) + 2.0 + j; };
  Vector u0 = sample_robin(gen, f);
  const double m0 = gen.mass_w.dot(u0);
  Vector u = evolve_diffusion(gen, u0, 1.0, 1e-3);
  CHECK(std::abs(gen.mass_w.dot(u) - m0) < 1e-12 * std::abs(m0));

  // each edge settles to its own average: kernel dimension is 2
  CHECK_THROWS_AS(equilibrium(gen), KernelDimensionNotOne);

  // edge 0 mean with trapezoid weights: cos integrates to zero
  double mean0 = 0.0, w0 = 0.0;
  for (int i = 0; i <= gen.N[0]; ++i) {
    int idx = (i == 0) ? gen.idx_v0(0) : (i == gen.N[0] ? gen.idx_v1(0) : gen.idx_interior(0, i));
    double w = (i == 0 || i == gen.N[0]) ? gen.dx[0] / 2 : gen.dx[0];
    mean0 += w * u[idx];
    w0 += w;
  }
  CHECK(mean0 / w0 == Catch::Approx(2.0).margin(1e-6));
  CHECK(u[gen.idx_v0(0)] == Catch::Approx(2.0).margin(1e-4));
}

TEST_CASE("Robin residual reports the trace defect", "[diffusion]") {
  Matrix K = Matrix::Zero(2, 2);
  CoefficientField a = CoefficientField::constant(1, 1.0);
  DiscreteGenerator gen = assemble_robin(a, K, 32);
  // smooth profile with nonzero end derivative: defect is visible
  auto f = [](int, double s) { return s * s; };
  Vector u = sample_robin(gen, f);
  DiffusionResiduals r0 = residuals_robin(gen, a, K, u);
  CHECK(r0.robin_defect == Catch::Approx(2.0).margin(1e-10));  // u'(1) = 2 vs 0

  // after relaxing, the discrete solution honors the conditions to O(dx^2)
  u = evolve_diffusion(gen, u, 0.5, 1e-3);
  DiffusionResiduals r1 = residuals_robin(gen, a, K, u);
  CHECK(r1.robin_defect < 1e-3);
}

TEST_CASE("malformed assembly inputs are rejected", "[diffusion]") {
  MetricGraph g = single_edge();
  CoefficientField a = CoefficientField::constant(1, 1.0);
  CHECK_THROWS_AS(assemble_standard(g, a, 1), ShapeMismatch);
  CHECK_THROWS_AS(assemble_standard(g, CoefficientField::constant(2, 1.0), 4),
                  ShapeMismatch);
  CHECK_THROWS_AS(assemble_robin(a, Matrix::Zero(3, 3), 4), ShapeMismatch);
  CHECK_THROWS_AS(
      assemble_robin(CoefficientField::per_edge({1.0, -1.0}), Matrix::Zero(4, 4), 4),
      NonPositiveCoefficient);
  CHECK_THROWS_AS(evolve_diffusion(assemble_standard(g, a, 4), Vector::Zero(5), 0.1,
                                   0.03),
                  NonGridTime);
}

TEST_CASE("spectral rate: slowest nonzero mode", "[diffusion][spectral]") {
  CoefficientField a = CoefficientField::constant(1, 1.0);

  // single edge, both ends insulated: the discrete modes are known exactly
  {
    const int N = 16;
    DiscreteGenerator gen = assemble_standard(single_edge(), a, N);
    const double expected = -4.0 * N * N * std::pow(std::sin(M_PI / (2.0 * N)), 2);
    CHECK(spectral_rate(gen) == Catch::Approx(expected).epsilon(1e-10));
  }

  // refined, the rate lands on -pi^2
  {
    DiscreteGenerator gen = assemble_standard(single_edge(), a, 128);
    CHECK(spectral_rate(gen) == Catch::Approx(-M_PI * M_PI).epsilon(1e-3));
  }

  // the equilibrium bundle carries the same number on request
  {
    DiscreteGenerator gen = assemble_standard(three_star(), CoefficientField::constant(3, 1.0), 24);
    EquilibriumProjection pi = equilibrium(gen, true);
    REQUIRE(pi.rate.has_value());
    CHECK(*pi.rate == Catch::Approx(spectral_rate(gen)).epsilon(1e-12));
    // the 3-star's slowest mode is antisymmetric, near -pi^2/4
    CHECK(*pi.rate == Catch::Approx(-M_PI * M_PI / 4.0).epsilon(0.01));
    EquilibriumProjection fast = equilibrium(gen, false);
    CHECK_FALSE(fast.rate.has_value());
  }
}
