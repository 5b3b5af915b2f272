#include "aidi/editing.hpp"
#include "aidi/error.hpp"

#include "test_util.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace aidi;

namespace {

const Shape kShape{1, 8, 8};

NoiseSchedule grid20() { return subsample(build_schedule(), 20); }

EditConfig aidi_e(int iters = 6) {
    EditConfig cfg;
    cfg.fixed_point = fixed_point_config(InversionMethod::AidiE, iters);
    return cfg;
}

// Diagonal affine predictor; source and target differ only where `inside` is set.
AffinePredictor diagonal_pair(const std::vector<bool>& inside) {
    const std::size_t n = inside.size();
    std::vector<double> a_null(n, 0.05), a_src(n, 0.2), a_tgt(n, 0.2);
    for (std::size_t k = 0; k < n; ++k)
        if (inside[k]) a_tgt[k] = -0.3;
    std::vector<double> b_tgt(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        if (inside[k]) b_tgt[k] = 0.4;
    return AffinePredictor({DenseMatrix::diagonal(a_null), DenseMatrix::diagonal(a_src), DenseMatrix::diagonal(a_tgt)},
                           {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), b_tgt});
}

}  // namespace

TEST_CASE("default_scorer") {
    const Latent ref({4}, {1.0, 2.0, 2.0, 4.0});  // norm 5
    CHECK(default_scorer(ref, ref) == 0.0);
    Latent shifted = ref;
    for (std::size_t k = 0; k < 4; ++k) shifted[k] += 1.0;
    CHECK(default_scorer(shifted, ref) == doctest::Approx(2.0 / 5.0).epsilon(1e-15));
    CHECK_THROWS_AS(default_scorer(Latent({3}), ref), ConfigError);

    double prev = 0.0;
    for (double d : {0.1, 0.2, 0.3}) {
        Latent c = ref;
        c[0] += d * 5.0;
        const double s = default_scorer(c, ref);
        CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("edit config validation") {
    EditConfig c;
    CHECK_NOTHROW(c.validate());
    c.omega_e = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EditConfig{};
    c.n_candidates = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EditConfig{};
    c.omega = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(candidate_seed(1, 0) != candidate_seed(1, 1));
    CHECK(candidate_seed(1, 0) != candidate_seed(2, 0));
}

TEST_CASE("reconstruct: zero predictor is exact") {
    const ZeroPredictor zero;
    const auto s = grid20();
    const Latent z0 = testutil::randn(kShape, 1);
    const auto r = reconstruct(s, zero, z0, PromptId::Source, aidi_e());
    for (std::size_t k = 0; k < z0.size(); ++k) CHECK(r.z0_rec[k] == doctest::Approx(z0[k]).epsilon(1e-12));
    CHECK(r.masks.size() == s.n_steps());
    CHECK(r.sampling_nfe == 40);
}

TEST_CASE("reconstruct: AIDI beats the Euler baseline") {
    const auto pred = make_contractive_predictor({64, 0});
    const auto s = grid20();
    const Latent z0 = testutil::randn(kShape, 2);
    const auto aidi = reconstruct(s, *pred, z0, PromptId::Source, aidi_e());
    EditConfig euler_cfg;
    euler_cfg.fixed_point = std::nullopt;
    const auto euler = reconstruct(s, *pred, z0, PromptId::Source, euler_cfg);
    const double e_aidi = relative_l2(aidi.z0_rec, z0);
    CHECK(e_aidi <= 1e-4);
    CHECK(relative_l2(euler.z0_rec, z0) > e_aidi);
    CHECK(*aidi.report.round_trip_l2 == e_aidi);
}

TEST_CASE("edit: degenerate edit reproduces the reconstruction") {
    const auto pred = make_contractive_predictor({64, 4});
    const auto s = grid20();
    const Latent z0 = testutil::randn(kShape, 3);
    auto cfg = aidi_e();
    cfg.omega_e = cfg.omega;
    const auto e = edit(s, *pred, z0, PromptId::Source, PromptId::Source, cfg);
    CHECK(e.best() == e.reconstruction.z0_rec);
    CHECK(e.candidates.size() == 1);
}

TEST_CASE("edit: uniform unit guidance follows the target linear recurrence") {
    const Latent z0 = testutil::randn(kShape, 5);
    auto r = testutil::randn_vec(64 * 64 * 2, 6);
    std::vector<double> ms(r.begin(), r.begin() + 64 * 64), mt(r.begin() + 64 * 64, r.end());
    for (double& v : ms) v *= 0.01;
    for (double& v : mt) v *= 0.01;
    const DenseMatrix A_src(64, 64, ms), A_tgt(64, 64, mt);
    const auto b_tgt = testutil::randn_vec(64, 7);
    const AffinePredictor pred({DenseMatrix::identity(64, 0.1), A_src, A_tgt},
                               {std::vector<double>(64, 0.0), std::vector<double>(64, 0.0), b_tgt});
    const auto s = grid20();
    auto cfg = aidi_e();
    cfg.omega = 1.0;
    cfg.omega_e = 1.0;
    const auto e = edit(s, pred, z0, PromptId::Source, PromptId::Target, cfg);

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Mat A = Eigen::Map<const Mat>(mt.data(), 64, 64);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(b_tgt.data(), 64);
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(e.reconstruction.z_T.data(), 64);
    for (std::size_t i = s.n_steps(); i-- > 0;) {
        const double ab_t = s.alpha_bar(s.timesteps()[i]), ab_p = s.alpha_bar(s.previous(i));
        const double ratio = std::sqrt(ab_p / ab_t);
        const double c = std::sqrt(1.0 - ab_p) - ratio * std::sqrt(1.0 - ab_t);
        z = (ratio * Mat::Identity(64, 64) + c * A) * z + c * b;
    }
    for (std::size_t k = 0; k < 64; ++k) CHECK(e.best()[k] == doctest::Approx(z(static_cast<Eigen::Index>(k))).epsilon(1e-11));
}

TEST_CASE("edit: stochastic best-of-n") {
    const auto pred = make_contractive_predictor({64, 8});
    const auto s = grid20();
    const Latent z0 = testutil::randn(kShape, 9);
    auto cfg = aidi_e();
    cfg.stochastic = {0.1, 17};
    cfg.n_candidates = 1;
    const auto single = edit(s, *pred, z0, PromptId::Source, PromptId::Target, cfg);
    cfg.n_candidates = 4;
    const auto four = edit(s, *pred, z0, PromptId::Source, PromptId::Target, cfg);
    REQUIRE(four.candidates.size() == 4);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) CHECK(four.candidates[a] != four.candidates[b]);
    CHECK(four.candidates[0] == single.candidates[0]);
    CHECK(four.scores[four.ranking[0]] <= single.scores[0]);
    for (std::size_t r = 1; r < 4; ++r) CHECK(four.scores[four.ranking[r - 1]] <= four.scores[four.ranking[r]]);

    // inversion runs once regardless of the candidate count
    CHECK(four.inversion_nfe == single.inversion_nfe);
    CHECK(four.inversion_nfe == 2u * 20u * 7u);
    CHECK(four.edit_nfe == 4u * single.edit_nfe);
    CHECK(single.edit_nfe == 40u);

    const auto again = edit(s, *pred, z0, PromptId::Source, PromptId::Target, cfg);
    CHECK(again.candidates == four.candidates);
}

TEST_CASE("edit: deterministic candidates are replicated") {
    const auto pred = make_contractive_predictor({64, 8});
    auto cfg = aidi_e();
    cfg.n_candidates = 3;
    const auto e = edit(grid20(), *pred, testutil::randn(kShape, 10), PromptId::Source, PromptId::Target, cfg);
    REQUIRE(e.candidates.size() == 3);
    CHECK(e.candidates[1] == e.candidates[0]);
    CHECK(e.edit_nfe == 40u);
}

TEST_CASE("edit: scorer failure falls back to candidate order") {
    const auto pred = make_contractive_predictor({64, 8});
    auto cfg = aidi_e();
    cfg.stochastic = {0.1, 3};
    cfg.n_candidates = 3;
    const Scorer broken = [](const Latent&, const Latent&) -> double { throw std::runtime_error("no metric"); };
    const auto e = edit(grid20(), *pred, testutil::randn(kShape, 11), PromptId::Source, PromptId::Target, cfg, broken);
    CHECK(e.scorer_failed);
    CHECK(e.ranking == std::vector<std::size_t>{0, 1, 2});

    const Scorer reversed = [](const Latent& c, const Latent&) { return -l2_norm(c); };
    const auto r = edit(grid20(), *pred, testutil::randn(kShape, 11), PromptId::Source, PromptId::Target, cfg, reversed);
    CHECK_FALSE(r.scorer_failed);
    CHECK(l2_norm(r.best()) >= l2_norm(r.candidates[r.ranking.back()]));

    std::ostringstream csv;
    write_scores_csv(r, csv);
    CHECK(csv.str().rfind("candidate,score,rank\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv.str()) lines += ch == '\n';
    CHECK(lines == 4);
}

TEST_CASE("edit: binary mask keeps the edit local") {
    const auto s = grid20();
    auto cfg = aidi_e();
    cfg.mask.big_m = 1e3;
    cfg.attention = centered_blob_source(8, 8, 2.0);
    const auto masks_probe = reconstruct(s, ZeroPredictor(), Latent(kShape), PromptId::Source, cfg).masks;
    const auto& m = masks_probe.front().grid.values;
    std::vector<bool> inside(64);
    std::size_t n_in = 0;
    for (std::size_t k = 0; k < 64; ++k) {
        inside[k] = m[k] > 0.5;
        n_in += inside[k];
        CHECK(std::min(m[k], 1.0 - m[k]) <= 1e-6);
    }
    REQUIRE(n_in > 0);
    REQUIRE(n_in < 64);

    const auto pred = diagonal_pair(inside);
    const Latent z0 = testutil::randn(kShape, 12);
    const auto e = edit(s, pred, z0, PromptId::Source, PromptId::Target, cfg);
    const Latent& rec = e.reconstruction.z0_rec;
    double in_diff = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
        const double d = std::abs(e.best()[k] - rec[k]);
        if (inside[k])
            in_diff = std::max(in_diff, d);
        else
            CHECK(d <= 1e-6 * std::max(1.0, std::abs(rec[k])));
    }
    CHECK(in_diff > 1e-2);

    // at the epsilon level: outside the mask the blended prediction equals omega guidance
    const Latent field = broadcast_to_latent(blended_scale_field(masks_probe.front(), cfg.omega, cfg.omega_e), kShape);
    const Latent blended = blended_epsilon(pred, z0, PromptId::Target, field, 500);
    const Latent plain = guided_epsilon(pred, z0, PromptId::Target, cfg.omega, 500);
    const Latent strong = guided_epsilon(pred, z0, PromptId::Target, cfg.omega_e, 500);
    for (std::size_t k = 0; k < 64; ++k) {
        const Latent& ref = inside[k] ? strong : plain;
        CHECK(std::abs(blended[k] - ref[k]) <= 1e-5 * std::max(1.0, std::abs(ref[k])));
    }
}
