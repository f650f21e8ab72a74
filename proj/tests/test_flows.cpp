#include <gtest/gtest.h>

#include <paradiff/flows.hpp>

#include "test_util.hpp"

using namespace paradiff;
using paradiff::testing::random_field;
using paradiff::testing::random_real_field;

namespace {

FourierField abs2(const FourierField& z) {
    return pointwise({&z}, z.modes(), 2, [](const cplx* v) { return cplx(std::norm(v[0])); });
}

// b(tau, z; x) = Re z(x)
GeneratorSpec linear_transport() {
    return transport_generator([](double, const FourierField& z) { return real_part(z); });
}

// b(tau, z; x) = (1 + tau) |z|^2(x) + Re z(x)
GeneratorSpec mixed_transport() {
    return transport_generator([](double tau, const FourierField& z) { return (1.0 + tau) * abs2(z) + real_part(z); });
}

FourierField low_field(int N, unsigned seed, double r) {
    FourierField u = random_field(N, seed, 1.0, 6, 2.0);
    return (r / sobolev_norm(u, 4.0)) * u;
}

}  // namespace

TEST(Flows, TranslationIsExactMultiplier) {
    const Quantizer q(16);
    const FourierField u0 = random_field(16, 3);
    const double beta = 0.37;
    const FlowResult r = flow_nonlinear(translation_generator(beta), u0, q);
    ASSERT_TRUE(r.converged);
    // RK4 on dz/dtau = i beta j z: local error (beta j h)^5 / 120 per step
    for (int j = -16; j <= 16; ++j) {
        const double bound = 100 * std::pow(std::abs(beta * j) * 0.01, 5) / 120 * std::abs(u0(j));
        EXPECT_LE(std::abs(r.final_state()(j) - std::polar(1.0, beta * j) * u0(j)), 1.05 * bound + 1e-15);
    }
    const FourierField back = flow_inverse(translation_generator(beta), r.final_state(), q);
    EXPECT_LE(max_abs(back - u0), 1e-9);
}

TEST(Flows, ZeroGeneratorIsIdentity) {
    const Quantizer q(16);
    const FourierField u0 = random_field(16, 5);
    const FlowResult r = flow_nonlinear(zero_generator(), u0, q);
    EXPECT_EQ(r.picard_iterations, 1);
    for (const auto& z : r.trajectory) EXPECT_EQ(max_abs(z - u0), 0.0);
    EXPECT_EQ(max_abs(flow_inverse(zero_generator(), u0, q) - u0), 0.0);
}

TEST(Flows, GeneratorFormTags) {
    const FourierField z = low_field(16, 1, 0.05);
    EXPECT_TRUE(generator_matches_form(linear_transport(), z));
    EXPECT_TRUE(generator_matches_form(zero_generator(), z));
    GeneratorSpec bad = linear_transport();
    bad.form = GeneratorForm::Multiplier;
    EXPECT_FALSE(generator_matches_form(bad, z));
}

class FlowContraction : public ::testing::TestWithParam<double> {};

TEST_P(FlowContraction, PicardRatiosAndRoundTrip) {
    const double r = GetParam();
    const Quantizer q(32);
    const FourierField u0 = low_field(32, 11, r);
    const FlowResult f = flow_nonlinear(mixed_transport(), u0, q);
    ASSERT_TRUE(f.converged);
    ASSERT_FALSE(f.contraction_ratios.empty());
    for (double rho : f.contraction_ratios) EXPECT_LE(rho, 0.75);
    const FourierField back = flow_inverse(mixed_transport(), f.final_state(), q);
    EXPECT_LE(sobolev_norm(back - u0, 3.0), 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Radii, FlowContraction, ::testing::Values(0.01, 0.025, 0.05));

TEST(Flows, NormConstantStableAcrossRadii) {
    const Quantizer q(32);
    std::vector<double> C;
    for (double r : {0.1, 0.05, 0.025}) C.push_back(flow_nonlinear(mixed_transport(), low_field(32, 17, r), q).norm_constant);
    for (double c : C) EXPECT_GT(c, 0.0);
    const double hi = *std::max_element(C.begin(), C.end()), lo = *std::min_element(C.begin(), C.end());
    EXPECT_LE(hi / lo, 2.0);
}

TEST(Flows, DirectRk4AgreesWithPicard) {
    const Quantizer q(24);
    const FourierField u0 = low_field(24, 2, 0.05);
    FlowOptions o;
    const FourierField a = flow_nonlinear(mixed_transport(), u0, q, o).final_state();
    o.picard = false;
    const FourierField b = flow_nonlinear(mixed_transport(), u0, q, o).final_state();
    EXPECT_LE(sobolev_norm(a - b, 3.0), 1e-9);
}

TEST(Flows, BlowUpAndNonContractionAreReported) {
    const Quantizer q(16);
    FlowOptions o;
    o.picard_max = 4;
    const FourierField big = low_field(16, 4, 40.0);
    EXPECT_THROW(flow_nonlinear(mixed_transport(), big, q, o), NumericalError);
    GeneratorSpec nan_gen = transport_generator([](double, const FourierField& z) {
        return FourierField::constant(z.modes(), std::numeric_limits<double>::quiet_NaN());
    });
    EXPECT_THROW(flow_nonlinear(nan_gen, low_field(16, 4, 0.01), q), NumericalError);
}

TEST(Flows, CsvExport) {
    const Quantizer q(8);
    const FlowResult r = flow_nonlinear(translation_generator(0.1), random_field(8, 1), q);
    const std::string path = ::testing::TempDir() + "flow.csv";
    r.write_csv(path, 4.0);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "tau,h_s_norm,picard_count");
    int lines = 0;
    for (std::string l; std::getline(is, l);) ++lines;
    EXPECT_EQ(lines, 101);
}

TEST(Characteristics, TrivialCases) {
    const Quantizer q(16);
    const FourierField z0 = low_field(16, 9, 0.02);
    const std::vector<double> x0{0.3, 2.0}, xi0{1.0, -3.0};
    const auto zero = characteristic_flow([](double, const FourierField& z) { return FourierField(z.modes()); }, z0, x0, xi0, q);
    for (size_t k = 0; k < zero.tau.size(); ++k) {
        EXPECT_EQ(zero.x[k], x0);
        EXPECT_EQ(zero.xi[k], xi0);
        EXPECT_EQ(max_abs(zero.z[k] - z0), 0.0);
    }
    // b(tau, z) = ||z||^2 / 2pi + 0.2: x-independent
    const auto flat = characteristic_flow(
        [](double, const FourierField& z) { return FourierField::constant(z.modes(), 0.2 + std::pow(sobolev_norm(z, 0), 2)); },
        z0, x0, xi0, q);
    for (size_t k = 0; k < flat.tau.size(); ++k) EXPECT_EQ(flat.xi[k], xi0);
}

TEST(Characteristics, XiLinearityAndJointStepping) {
    const Quantizer q(16);
    const FourierField z0 = low_field(16, 21, 0.05);
    CoefFn b = [](double tau, const FourierField& z) { return (1.0 + tau) * abs2(z) + real_part(z) + 0.1 * real_part(FourierField::mode(z.modes(), 1, kSqrt2Pi)); };
    const std::vector<double> x0{0.1, 0.1, 0.1, 4.0, 4.0, 4.0}, xi0{1, 2, 5, 1, 2, 5};
    const auto c = characteristic_flow(b, z0, x0, xi0, q);
    ASSERT_TRUE(c.converged);
    for (size_t k = 0; k < c.tau.size(); ++k)
        for (size_t p : {1u, 2u, 4u, 5u}) EXPECT_NEAR(c.psi_xi(k, p), c.psi_xi(k, p - p % 3), 1e-9);
    FlowOptions o;
    o.picard = false;
    const auto d = characteristic_flow(b, z0, x0, xi0, q, o);
    for (size_t p = 0; p < x0.size(); ++p) {
        EXPECT_NEAR(c.x.back()[p], d.x.back()[p], 1e-9);
        EXPECT_NEAR(c.xi.back()[p], d.xi.back()[p], 1e-9);
    }
    EXPECT_LE(sobolev_norm(c.z.back() - d.z.back(), 3.0), 1e-9);
}

TEST(Diffeo, InversionExamples) {
    const int N = 32;
    EXPECT_EQ(max_abs(invert_torus_diffeo(FourierField(N))), 0.0);
    const FourierField g = 0.1 * cplx(0, -0.5) * (FourierField::mode(N, 1, kSqrt2Pi) - FourierField::mode(N, -1, kSqrt2Pi));
    const FourierField beta = invert_torus_diffeo(g);
    EXPECT_LE(diffeo_residual(g, beta), 1e-10);
    const FourierField g2 = invert_torus_diffeo(beta);
    EXPECT_LE(sup_norm(g2 - g), 1e-9);
}

TEST(Diffeo, RandomInvolution) {
    const int N = 64;
    FourierField g = random_real_field(N, 8, 1.0, 6, 3.0);
    g[0] = 0.0;
    g = (0.3 / sup_norm(derivative(g))) * g;
    const FourierField beta = invert_torus_diffeo(g);
    EXPECT_LE(diffeo_residual(g, beta), 1e-10);
    EXPECT_LE(sup_norm(invert_torus_diffeo(beta) - g), 1e-9);
}

TEST(Diffeo, RejectsNonDiffeomorphism) {
    const int N = 16;
    const FourierField g = 1.2 * cplx(0, -0.5) * (FourierField::mode(N, 1, kSqrt2Pi) - FourierField::mode(N, -1, kSqrt2Pi));
    EXPECT_THROW(invert_torus_diffeo(g), ValidationError);
}

namespace {

// State-dependent beta(W; x) = 0.5 Re W(x) + 0.05 sin x
FourierField beta_of_state(const FourierField& w) {
    const int N = w.modes();
    return 0.5 * real_part(w) + 0.05 * cplx(0, -0.5) * (FourierField::mode(N, 1, kSqrt2Pi) - FourierField::mode(N, -1, kSqrt2Pi));
}

}  // namespace

TEST(GeneratorB, ZeroAndStateIndependent) {
    const Quantizer q(16);
    const FourierField W = low_field(16, 3, 0.01);
    const GeneratorB zero([](const FourierField& w) { return FourierField(w.modes()); }, q);
    EXPECT_EQ(sup_norm(zero(0.5, W)), 0.0);
    const FourierField fixed = 0.2 * cplx(0, -0.5) * (FourierField::mode(16, 1, kSqrt2Pi) - FourierField::mode(16, -1, kSqrt2Pi));
    const GeneratorB gb([fixed](const FourierField&) { return fixed; }, q);
    const auto s = gb.solve(0.7, W);
    const FourierField fx = derivative(fixed);
    const FourierField b0 = pointwise({&fixed, &fx}, 16, 2, [](const cplx* v) { return v[0].real() / (1.0 + 0.7 * v[1].real()); });
    EXPECT_LE(sup_norm(s.b - b0), 1e-14);
    EXPECT_LE(s.residual, 1e-14);
}

TEST(GeneratorB, ContractsAtSmallState) {
    const Quantizer q(32);
    const FourierField W = low_field(32, 13, 0.01);
    const GeneratorB gb(beta_of_state, q);
    for (double tau : {0.25, 1.0}) {
        const auto s = gb.solve(tau, W);
        EXPECT_LE(s.residual, 1e-9);
        ASSERT_GE(s.increments.size(), 2u);
        for (size_t k = 1; k < s.increments.size(); ++k)
            if (s.increments[k - 1] > 1e-13) EXPECT_LE(s.increments[k] / s.increments[k - 1], 0.5);
    }
}

TEST(GeneratorB, CharacteristicsFollowTheDiffeomorphism) {
    const Quantizer q(32);
    const FourierField z0 = low_field(32, 19, 0.02);
    const GeneratorB gb(beta_of_state, q);
    CoefFn b = [&gb](double tau, const FourierField& w) { return gb(tau, w); };
    std::vector<double> x0, xi0;
    for (double x : {0.0, 1.1, 2.5, 3.9, 5.2}) {
        x0.push_back(x);
        xi0.push_back(1.0);
    }
    FlowOptions o;
    o.dtau = 0.05;
    const auto c = characteristic_flow(b, z0, x0, xi0, q, o);
    double e1 = 0.0, e2 = 0.0;
    for (size_t k = 0; k < c.tau.size(); ++k) {
        const double tau = c.tau[k];
        const FourierField beta = beta_of_state(c.z[k]);
        for (size_t p = 0; p < x0.size(); ++p) {
            const auto [bv, bx] = beta.eval_both(c.x[k][p]);
            e1 = std::max(e1, std::abs(c.x[k][p] + tau * bv.real() - x0[p]));
            e2 = std::max(e2, std::abs(c.xi[k][p] - xi0[p] * (1.0 + tau * bx.real())));
        }
    }
    EXPECT_LE(e1, 1e-7);
    EXPECT_LE(e2, 1e-7);
}

TEST(ConstantMb, ClosedForms) {
    const Quantizer q(8);
    const FourierField z0 = low_field(8, 1, 0.02);
    MbOptions o;
    o.n_iters = 1;
    const auto zero = constant_m_b([](const FourierField& w) { return FourierField(w.modes()); }, 2.0, z0, q, o);
    EXPECT_NEAR(zero.m_b, 0.0, 1e-10);
    const auto c = constant_m_b([](const FourierField& w) { return FourierField::constant(w.modes(), 0.3); }, 3.0, z0, q, o);
    EXPECT_NEAR(c.m_b, 0.3, 1e-10);
    EXPECT_NEAR(c.closed_form, 0.3, 1e-10);
    EXPECT_THROW(constant_m_b([](const FourierField& w) { return FourierField::constant(w.modes(), -1.5); }, 2.0, z0, q, o),
                 ValidationError);
    EXPECT_THROW(constant_m_b([](const FourierField& w) { return FourierField(w.modes()); }, 0.5, z0, q, o), ValidationError);
}

TEST(ConstantMb, HarmonicAverage) {
    // a = 0.5 cos x, m = 2: m = [2pi / int (1 + a)^{-1/2}]^2 - 1
    std::vector<double> a;
    for (double x : grid_points(257)) a.push_back(0.5 * std::cos(x));
    double acc = 0.0;
    const int K = 200000;
    for (int k = 0; k < K; ++k) acc += std::pow(1.0 + 0.5 * std::cos(kTwoPi * (k + 0.5) / K), -0.5) * kTwoPi / K;
    EXPECT_NEAR(harmonic_constant(a, 2.0), std::pow(kTwoPi / acc, 2) - 1.0, 1e-10);
}

namespace {

// 0.05 cos x + 0.02 e^{14ix}: the high mode sits where the paraproduct cutoff lets b act.
FourierField mb_state(int N) {
    return 0.05 * (FourierField::mode(N, 1, kSqrt2Pi / 2) + FourierField::mode(N, -1, kSqrt2Pi / 2)) +
           0.02 * FourierField::mode(N, 14, kSqrt2Pi);
}

}  // namespace

TEST(ConstantMb, VarianceDropsOverTwoIterations) {
    const int N = 20;
    const Quantizer q(N);
    const auto res = constant_m_b(abs2, 2.0, mb_state(N), q);
    ASSERT_EQ(res.history.size(), 3u);
    EXPECT_GE(res.history[0].variance / res.history[2].variance, 10.0);
    EXPECT_LT(res.history[2].variance, res.history[1].variance);
    EXPECT_NEAR(res.history[1].m_n, res.closed_form, 1e-8);
    EXPECT_NEAR(res.history[2].m_n, res.m_of_state(detail::transport_rk4(res.b, mb_state(N), 0.0, 1.0, 0.1, q)), 1e-14);
}

// F(b)(x(1)) = (1 + a(z0, x0)) / xi(1)^m along the characteristics of b with xi0 = 1.
TEST(ConstantMb, CharacteristicOracle) {
    const int N = 32;
    const Quantizer q(N);
    const FourierField z0 = mb_state(N);
    MbOptions o;
    o.n_iters = 1;
    const auto res = constant_m_b(abs2, 2.0, z0, q, o);
    const auto x0 = grid_points(9);
    FlowOptions fo;
    fo.picard = false;
    fo.dtau = 0.05;
    const auto c = characteristic_flow(res.b, z0, x0, std::vector<double>(x0.size(), 1.0), q, fo);
    const FourierField a0 = abs2(z0);
    for (size_t p = 0; p < x0.size(); ++p) {
        const double oracle = (1.0 + a0.eval(x0[p]).real()) / std::pow(c.xi.back()[p], 2);
        EXPECT_NEAR(res.F(c.x.back()[p]), oracle, 1e-8);
    }
}
