#include <doctest.h>

#include <cmath>
#include <random>

#include "qdlab/commutator.hpp"

using namespace qdlab;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

// independent oracle: dense matrices and the reversed-bracket convention
MatrixXcd hat_matrix_oracle(const HoppingKernel& kernel, const WeightSequence& gamma, int p,
                            const Window& w) {
    MatrixXcd h0 = detail::free_operator_matrix(kernel, w);
    MatrixXcd x = momentum_matrix({p, gamma}, w);
    return Complex{0.0, -1.0} * commutator_bracket(h0, x);
}

}  // namespace

TEST_CASE("momentum_matrix: identity, position and hopping weights") {
    Window w{0, 2};
    MatrixXcd id = momentum_matrix({0, WeightSequence::delta0()}, w);
    CHECK((id - MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

    Window wc{-2, 2};
    MatrixXcd x1 = momentum_matrix({1, WeightSequence::delta0()}, wc);
    for (int i = 0; i < 5; ++i) CHECK(x1(i, i) == Complex{static_cast<double>(wc.site_of(i)), 0.0});

    WeightSequence hop = WeightSequence::from_table({{1, 1.0}, {-1, 1.0}}, std::exp(1.0), 1.0);
    MatrixXcd m = momentum_matrix({1, hop}, w);
    CHECK(m(1, 0) == Complex{1.0, 0.0});
    CHECK(m(1, 2) == Complex{1.0, 0.0});
    CHECK(m(0, 1) == Complex{0.0, 0.0});  // site 0 weight kills the row
    CHECK(m(2, 1) == Complex{2.0, 0.0});
    CHECK(m(0, 0) == Complex{0.0, 0.0});
}

TEST_CASE("commutator_decompose: p=1 delta weights against the matrix oracle") {
    HoppingKernel nn = HoppingKernel::nearest_neighbor(1.0);
    auto parts = commutator_decompose(nn, WeightSequence::delta0(), 1);
    REQUIRE(parts.size() == 1);
    CHECK(std::abs(parts[0].at(1) - Complex{0.0, -1.0}) < 1e-15);
    CHECK(std::abs(parts[0].at(-1) - Complex{0.0, 1.0}) < 1e-15);
    CHECK(std::abs(parts[0].at(0)) == 0.0);

    // 64-site window interior: hat(X) must equal X_{2*0}^{gamma^0}
    Window w{-32, 31};
    MatrixXcd oracle = hat_matrix_oracle(nn, WeightSequence::delta0(), 1, w);
    MatrixXcd sum = momentum_matrix({0, parts[0]}, w);
    double worst = 0.0;
    for (int r = 2; r < 62; ++r)
        for (int c = 2; c < 62; ++c) worst = std::max(worst, std::abs(oracle(r, c) - sum(r, c)));
    CHECK(worst < 1e-13);
}

TEST_CASE("commutator_decompose: zero kernel gives zero sequences") {
    HoppingKernel none = HoppingKernel::nearest_neighbor(0.0);
    auto parts = commutator_decompose(none, WeightSequence::exponential(1.0, 1.0, 1e-10), 3);
    REQUIRE(parts.size() == 3);
    for (auto& seq : parts) CHECK(seq.entries.empty());
    CHECK(commutator_residual(none, WeightSequence::delta0(), 2, Window{-16, 15}) == 0.0);
}

TEST_CASE("commutator_decompose: p=2 delta weights give orders 0 and 1") {
    HoppingKernel nn = HoppingKernel::nearest_neighbor(1.0);
    auto parts = commutator_decompose(nn, WeightSequence::delta0(), 2);
    REQUIRE(parts.size() == 2);
    CHECK_FALSE(parts[0].entries.empty());
    CHECK_FALSE(parts[1].entries.empty());
    CHECK(commutator_residual(nn, WeightSequence::delta0(), 2, Window{-32, 31}) <= 1e-12);
}

TEST_CASE("commutator_residual: long-range kernel and weights at p=3") {
    HoppingKernel kernel = HoppingKernel::exponential(1.0, 1.0, 1e-12);
    WeightSequence gamma = WeightSequence::exponential(1.0, 1.0, 1e-12);
    double r = commutator_residual(kernel, gamma, 3, Window{-128, 127});
    CHECK(r <= 1e-10);
}

TEST_CASE("commutator_residual: window smaller than the collar is rejected") {
    HoppingKernel kernel = HoppingKernel::exponential(1.0, 0.5, 1e-10);
    WeightSequence gamma = WeightSequence::exponential(1.0, 0.5, 1e-10);
    CHECK_THROWS_AS(commutator_residual(kernel, gamma, 2, Window{0, 20}), std::invalid_argument);
}

TEST_CASE("decomposition exactness over randomized kernels and weights") {
    std::mt19937_64 rng(314);
    std::uniform_real_distribution<double> amp(0.5, 2.0), rate(0.7, 1.6), phase(-1.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        double ka = amp(rng), kr = rate(rng);
        HoppingKernel kernel;
        if (trial % 2 == 0) {
            kernel = HoppingKernel::exponential(ka, kr, 1e-10);
        } else {
            std::map<int, Complex> upper;
            int radius = 6;
            for (int k = 1; k <= radius; ++k) {
                double arg = phase(rng);
                upper[k] = ka * std::exp(-kr * k) * Complex{std::cos(arg), std::sin(arg)};
            }
            upper[0] = Complex{0.5 * ka * phase(rng), 0.0};
            kernel = HoppingKernel::from_table(upper, ka, kr);
        }
        WeightSequence gamma = WeightSequence::exponential(amp(rng), rate(rng), 1e-10);
        int p = 1 + static_cast<int>(trial % 4);
        double r = commutator_residual(kernel, gamma, p, Window{-48, 47});
        CHECK(r <= 1e-12);
    }
}

TEST_CASE("order drop: diagonal entries of the sum are polynomials of degree < p") {
    HoppingKernel kernel = HoppingKernel::exponential(1.2, 1.1, 1e-8);
    WeightSequence gamma = WeightSequence::exponential(0.8, 0.9, 1e-8);
    const int p = 3;
    auto parts = commutator_decompose(kernel, gamma, p);
    REQUIRE(parts.size() == 3);
    // along a fixed offset m, the summed weight is sum_j site^j gamma^j_m:
    // a polynomial of degree p-1 = 2 in the site index, so third differences vanish
    const int m = 1;
    auto value_at = [&](int site) {
        Complex v{0.0, 0.0};
        for (int j = 0; j < p; ++j) v += pow_int(site, j) * parts[j].at(m);
        return v;
    };
    for (int site = -5; site <= 5; ++site) {
        Complex d3 = value_at(site + 3) - 3.0 * value_at(site + 2) + 3.0 * value_at(site + 1) -
                     value_at(site);
        CHECK(std::abs(d3) < 1e-10);
    }
}

TEST_CASE("envelope closure: decomposed sequences keep exponential decay") {
    HoppingKernel kernel = HoppingKernel::exponential(1.0, 1.3, 1e-12);
    WeightSequence gamma = WeightSequence::exponential(1.0, 0.8, 1e-12);
    for (int p = 1; p <= 4; ++p) {
        auto parts = commutator_decompose(kernel, gamma, p);
        for (auto& seq : parts) {
            if (seq.entries.size() < 6) continue;
            auto fit = sequence_decay_fit(seq);
            CHECK_FALSE(fit.degenerate);
            CHECK(fit.rate_fit >= std::min(1.3, 0.8) - 0.1);
            CHECK(std::isfinite(fit.amp_fit));
        }
    }
}

TEST_CASE("heisenberg growth: stationary spec has flat norms") {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::nearest_neighbor(1.0);
    spec.potential = PotentialLaw::explicit_table(-32, std::vector<double>(65, 1.0));
    spec.coupling = 0.0;
    Window w{-32, 32};
    StateVector phi = make_delta(1, w);
    auto rep = heisenberg_moment_growth(spec, WeightSequence::delta0(), 1, phi,
                                        {0.5, 1.0, 2.0, 4.0, 8.0}, w);
    CHECK(std::abs(rep.slope) < 0.05);
    CHECK(rep.pass_growth);
    CHECK(rep.pass_integral);
}

TEST_CASE("heisenberg growth: free chain is at most ballistic for N = 1") {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::nearest_neighbor(1.0);
    spec.potential = PotentialLaw::constant(0.0);
    spec.coupling = 1.0;
    Window w{-192, 192};
    StateVector phi = make_delta(0, w);
    EigenCache cache;
    auto rep = heisenberg_moment_growth(spec, WeightSequence::delta0(), 1, phi,
                                        geometric_grid(2.0, 40.0, 10), w, &cache);
    CHECK(rep.slope <= 1.05);
    CHECK(rep.slope >= 0.8);
    CHECK(rep.pass_growth);
    CHECK(rep.pass_integral);
}

TEST_CASE("heisenberg growth: long-range kernel with potential at N = 2") {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::exponential(1.0, 1.0, 1e-10);
    spec.potential = PotentialLaw::quasiperiodic(TrigPoly{0.0, {2.0}, {}}, 0.0, kGolden);
    spec.coupling = 1.0;
    Window w{-160, 160};
    StateVector phi = make_delta(0, w);
    EigenCache cache;
    auto rep = heisenberg_moment_growth(spec, WeightSequence::delta0(), 2, phi,
                                        geometric_grid(2.0, 25.0, 8), w, &cache);
    CHECK(rep.slope <= 2.1);
    CHECK(rep.pass_growth);
    CHECK(rep.pass_integral);
    // both commutator norms are reported; with delta weights they coincide
    for (auto& pt : rep.points)
        CHECK(pt.norm_hat_free == doctest::Approx(pt.norm_hat_full).epsilon(1e-8));
}

TEST_CASE("consistency link: ||X_{2N} phi_t||^2 equals the 2N-th moment sum") {
    OperatorSpec spec;
    spec.kernel = HoppingKernel::exponential(1.0, 1.0, 1e-10);
    spec.potential = PotentialLaw::constant(0.0);
    spec.coupling = 1.0;
    Window w{-96, 96};
    StateVector phi = make_delta(0, w);
    EigenCache cache;
    const int order = 2;
    StateVector psi = evolve(spec, w, phi, 12.0, &cache);
    MatrixXcd x = momentum_matrix({order, WeightSequence::delta0()}, w);
    double lhs = (x * psi.amplitudes).squaredNorm();
    double rhs = 0.0;
    for (int i = 0; i < w.size(); ++i)
        rhs += site_weight(w.site_of(i), 2 * order) * std::norm(psi.amplitudes(i));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
