#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "belllab/estimators.hpp"
#include "belllab/models.hpp"

using namespace belllab;

namespace {

ResponseTable random_table(std::uint64_t seed, std::size_t k, bool deterministic) {
    rng::Stream s(seed, 0, rng::Role::Lambda);
    ResponseTable t;
    for (auto* side : {&t.left, &t.right})
        for (auto& row : *side) {
            row.resize(k);
            for (double& p : row) p = deterministic ? double(s.next_below(2)) : s.next_unit();
        }
    return t;
}

TrialRecord make_record(std::uint64_t index, int pair, int a, int b) {
    const auto settings = canonical_settings();
    TrialRecord rec;
    rec.trial_index = index;
    rec.alpha = pair < 2 ? SettingLabel{Side::Left, Slot::Unprimed, settings.left_unprimed}
                         : SettingLabel{Side::Left, Slot::Primed, settings.left_primed};
    rec.beta = pair % 2 == 0 ? SettingLabel{Side::Right, Slot::Unprimed, settings.right_unprimed}
                             : SettingLabel{Side::Right, Slot::Primed, settings.right_primed};
    rec.a = Outcome{a};
    rec.b = Outcome{b};
    return rec;
}

/// Counts with the same outcome distribution in every pair, scaled by n/4.
SettingCounts counts_from_rows(const std::array<std::array<std::uint64_t, 4>, 4>& rows) {
    SettingCounts counts;
    for (int p = 0; p < 4; ++p) {
        counts.pairs[std::size_t(p)].outcomes = rows[std::size_t(p)];
        counts.pairs[std::size_t(p)].n = rows[std::size_t(p)][0] + rows[std::size_t(p)][1] +
                                         rows[std::size_t(p)][2] + rows[std::size_t(p)][3];
    }
    return counts;
}

} // namespace

TEST_CASE("accumulate tallies one trial per pair") {
    TrialBatch batch;
    batch.angles = canonical_settings();
    for (int p = 0; p < 4; ++p) batch.records.push_back(make_record(std::uint64_t(p), p, 1, 1));

    const auto counts = accumulate(batch);
    for (int p = 0; p < 4; ++p) {
        CHECK(counts.pairs[std::size_t(p)].n == 1);
        CHECK(counts.pairs[std::size_t(p)].n11() == 1);
        CHECK(counts.pairs[std::size_t(p)].n00() == 0);
    }
    CHECK(counts.total() == 4);
}

TEST_CASE("accumulate rejects an empty batch") {
    TrialBatch batch;
    batch.angles = canonical_settings();
    CHECK_THROWS_AS(accumulate(batch), InsufficientDataError);
}

TEST_CASE("constant model puts every outcome in the n11 cell") {
    const auto spec = ModelSpec::lhv(ModelKind::LhvDeterministic, ResponseTable::constant(1.0, 2),
                                     uniform_weights(2));
    const auto batch = run_trials(spec, 100, 11);
    const auto counts = accumulate(batch);

    std::uint64_t sum11 = 0;
    for (const auto& p : counts.pairs) {
        sum11 += p.n11();
        CHECK(p.n == p.n11());
    }
    CHECK(sum11 == 100);
    CHECK(counts.total() == 100);
}

TEST_CASE("uniform setting choice spreads pair totals evenly") {
    const auto batch = run_trials(ModelSpec::quantum(canonical_settings(), 1.0), 400000, 3);
    const auto counts = accumulate(batch);
    for (const auto& p : counts.pairs) {
        // 3-sigma multinomial band around n/4.
        CHECK(p.n > 100000 - 900);
        CHECK(p.n < 100000 + 900);
    }
    CHECK(counts.total() == 400000);
}

TEST_CASE("accumulate is order-invariant") {
    const auto spec = ModelSpec::quantum(canonical_settings(), 0.9);
    auto batch = run_trials(spec, 5000, 21);
    const auto reference = accumulate(batch);

    std::mt19937_64 gen(99);
    std::shuffle(batch.records.begin(), batch.records.end(), gen);
    const auto shuffled = accumulate(batch);

    for (int p = 0; p < 4; ++p) {
        CHECK(shuffled.pairs[std::size_t(p)].n == reference.pairs[std::size_t(p)].n);
        CHECK(shuffled.pairs[std::size_t(p)].outcomes == reference.pairs[std::size_t(p)].outcomes);
    }
}

TEST_CASE("merging partial counts matches a single pass") {
    const auto spec = ModelSpec::quantum(canonical_settings(), 1.0);
    const auto batch = run_trials(spec, 9000, 8);
    const auto whole = accumulate(batch);

    TrialBatch first, second, third;
    first.angles = second.angles = third.angles = batch.angles;
    for (std::size_t i = 0; i < batch.records.size(); ++i)
        (i % 3 == 0 ? first : i % 3 == 1 ? second : third).records.push_back(batch.records[i]);

    auto a = accumulate(first);
    auto b = accumulate(second);
    auto c = accumulate(third);

    // (a + b) + c
    SettingCounts left = a;
    left.merge(b).merge(c);
    // a + (b + c)
    SettingCounts right = b;
    right.merge(c);
    SettingCounts right2 = a;
    right2.merge(right);
    // b + a + c
    SettingCounts swapped = b;
    swapped.merge(a).merge(c);

    for (int p = 0; p < 4; ++p) {
        CHECK(left.pairs[std::size_t(p)].outcomes == whole.pairs[std::size_t(p)].outcomes);
        CHECK(right2.pairs[std::size_t(p)].outcomes == whole.pairs[std::size_t(p)].outcomes);
        CHECK(swapped.pairs[std::size_t(p)].outcomes == whole.pairs[std::size_t(p)].outcomes);
    }
    CHECK(left.total() == 9000);
}

TEST_CASE("space-1 on the all-(1,1) batch is exactly zero") {
    TrialBatch batch;
    batch.angles = canonical_settings();
    for (int p = 0; p < 4; ++p)
        for (int r = 0; r < 5; ++r)
            batch.records.push_back(make_record(std::uint64_t(5 * p + r), p, 1, 1));

    const auto eval = space1_ch(accumulate(batch));
    CHECK(eval.s == 0.0);
    CHECK(eval.stderr_ == 0.0);
    CHECK(eval.space == EvaluationSpace::Space1);
    CHECK(eval.terms.p11_ab == 1.0);
    CHECK(eval.terms.pA_a == 1.0);
}

TEST_CASE("space-1 quantum estimate sits on the known value") {
    const auto batch = run_trials(ModelSpec::quantum(canonical_settings(), 1.0), 400000, 17);
    const auto eval = space1_ch(accumulate(batch));

    CHECK(std::abs(eval.s - 0.2071) < 0.006);
    // Exact delta-method value at the true proportions with 1e5 per pair
    // is 0.00361; the band below just pins the order of magnitude.
    CHECK(eval.stderr_ > 0.002);
    CHECK(eval.stderr_ < 0.005);
    CHECK(eval.s > 0.0); // the violation itself
    CHECK(eval.n_effective[0] == accumulate(batch).pairs[0].n);
}

TEST_CASE("space-1 on coin-flip responses lands at -1/2") {
    const auto spec = ModelSpec::lhv(ModelKind::LhvStochastic, ResponseTable::constant(0.5, 3),
                                     uniform_weights(3));
    const auto batch = run_trials(spec, 200000, 29);
    const auto eval = space1_ch(accumulate(batch));

    // Exact terms: 0.25+0.25+0.25-0.25-0.5-0.5 = -0.5.
    CHECK(std::abs(eval.s - (-0.5)) < 3.0 * eval.stderr_);
}

TEST_CASE("space-1 refuses an unpopulated setting pair") {
    TrialBatch batch;
    batch.angles = canonical_settings();
    for (int p = 0; p < 3; ++p) batch.records.push_back(make_record(std::uint64_t(p), p, 0, 0));

    const auto counts = accumulate(batch);
    CHECK_THROWS_WITH(space1_ch(counts), Catch::Matchers::ContainsSubstring("(a',b')"));
    CHECK_THROWS_AS(space1_ch(counts), InsufficientDataError);
    CHECK_THROWS_AS(no_signaling_report(counts), InsufficientDataError);
}

TEST_CASE("marginal policy: reference pair vs pooling") {
    // Hand-built counts whose (a,b) marginals differ from the pooled ones.
    const auto counts = counts_from_rows({{
        {{0, 0, 50, 50}},   // (a,b):   P(A=1)=1.0, P(B=1)=0.5
        {{100, 0, 0, 0}},   // (a,b'):  P(A=1)=0.0
        {{0, 100, 0, 0}},   // (a',b):  P(B=1)=1.0
        {{25, 25, 25, 25}}, // (a',b')
    }});

    const auto ref = space1_ch(counts, MarginalPolicy::ReferencePair);
    CHECK(ref.terms.pA_a == 1.0);
    CHECK(ref.terms.pB_b == 0.5);
    CHECK(ref.n_effective[4] == 100);

    const auto pooled = space1_ch(counts, MarginalPolicy::PooledAcrossPartner);
    CHECK(pooled.terms.pA_a == 0.5);  // (100 + 0) / 200
    CHECK(pooled.terms.pB_b == 0.75); // (50 + 100) / 200
    CHECK(pooled.n_effective[4] == 200);
    CHECK(pooled.n_effective[5] == 200);

    // The p11 terms are policy-independent.
    CHECK(pooled.terms.p11_ab == ref.terms.p11_ab);
    CHECK(pooled.terms.p11_apbp == ref.terms.p11_apbp);
}

TEST_CASE("delta-method standard error matches the hand formula") {
    const auto counts = counts_from_rows({{
        {{25, 25, 25, 25}},
        {{25, 25, 25, 25}},
        {{25, 25, 25, 25}},
        {{25, 25, 25, 25}},
    }});
    const auto eval = space1_ch(counts);

    CHECK(eval.s == Catch::Approx(-0.5).margin(1e-12));
    // Four f11 terms at 0.25 and two marginals at 0.5, all on n=100.
    const double var = 4.0 * (0.25 * 0.75 / 100.0) + 2.0 * (0.5 * 0.5 / 100.0);
    CHECK(eval.stderr_ == Catch::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("standard error shrinks as one over root n") {
    const auto spec = ModelSpec::quantum(canonical_settings(), 1.0);
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        const auto small = space1_ch(accumulate(run_trials(spec, 10000, seed)));
        const auto large = space1_ch(accumulate(run_trials(spec, 160000, seed + 100)));
        const double ratio = small.stderr_ / large.stderr_;
        CHECK(ratio > 3.2);
        CHECK(ratio < 4.8);
    }
}

TEST_CASE("space-2 point masses evaluate exactly") {
    SECTION("all ones") {
        std::vector<CounterfactualQuadruple> qs(7, CounterfactualQuadruple::from_index(15));
        const auto eval = space2_ch(qs);
        CHECK(eval.s == 0.0);
        CHECK(eval.space == EvaluationSpace::Space2);
        CHECK(eval.n_effective[0] == 7);
    }
    SECTION("(1,0,0,1) cancellation") {
        const CounterfactualQuadruple q{Outcome{1}, Outcome{0}, Outcome{0}, Outcome{1}};
        std::vector<CounterfactualQuadruple> qs(5, q);
        const auto eval = space2_ch(qs);
        CHECK(eval.terms.p11_ab == 0.0);
        CHECK(eval.terms.p11_abp == 1.0);
        CHECK(eval.terms.p11_apb == 0.0);
        CHECK(eval.terms.p11_apbp == 0.0);
        CHECK(eval.terms.pA_a == 1.0);
        CHECK(eval.terms.pB_b == 0.0);
        CHECK(eval.s == 0.0);
    }
}

TEST_CASE("space-2 uniform mixture of all sixteen outcomes") {
    std::vector<CounterfactualQuadruple> qs;
    for (int i = 0; i < 16; ++i) qs.push_back(CounterfactualQuadruple::from_index(i));
    const auto eval = space2_ch(qs);
    CHECK(eval.s == Catch::Approx(-0.5).margin(1e-12));
    CHECK(eval.terms.p11_ab == Catch::Approx(0.25).margin(1e-12));
    CHECK(eval.terms.pA_a == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("space-2 rejects an empty sequence") {
    CHECK_THROWS_AS(space2_ch(std::span<const CounterfactualQuadruple>{}),
                    InsufficientDataError);
}

TEST_CASE("space-2 respects the bound for any sequence whatsoever") {
    for (int i = 0; i < 16; ++i) {
        std::vector<CounterfactualQuadruple> qs(3, CounterfactualQuadruple::from_index(i));
        CHECK(ch_within_bounds(space2_ch(qs).s, 1e-12));
    }

    rng::Stream s(314, 0, rng::Role::Lambda);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<CounterfactualQuadruple> qs;
        const std::uint64_t len = 1 + s.next_below(50);
        for (std::uint64_t j = 0; j < len; ++j)
            qs.push_back(CounterfactualQuadruple::from_index(int(s.next_below(16))));
        CHECK(ch_within_bounds(space2_ch(qs).s, 1e-12));
    }
}

TEST_CASE("the two spaces agree on local-variable batches") {
    for (std::uint64_t seed : {51u, 52u, 53u}) {
        const auto table = random_table(seed, 4, false);
        const auto spec = ModelSpec::lhv(ModelKind::LhvStochastic, table, uniform_weights(4));
        const auto batch = run_trials(spec, 400000, seed, 1, QuadrupleMode::Require);
        REQUIRE(batch.quadruples.has_value());

        const auto e1 = space1_ch(accumulate(batch));
        const auto e2 = space2_ch(*batch.quadruples);
        CHECK(std::abs(e1.s - e2.s) < 4.0 * (e1.stderr_ + e2.stderr_));
    }
}

TEST_CASE("no-signaling diagnostic is quiet for a local model") {
    const auto table = random_table(88, 5, true);
    const auto spec = ModelSpec::lhv(ModelKind::LhvDeterministic, table, uniform_weights(5));
    const auto report = no_signaling_report(accumulate(run_trials(spec, 400000, 61)));
    for (const auto& e : report.entries) CHECK(e.z <= 4.0);
}

TEST_CASE("no-signaling diagnostic flags the signaling model") {
    const auto report =
        no_signaling_report(accumulate(run_trials(ModelSpec::signaling(1.0), 400000, 62)));
    double max_z = 0.0, max_d = 0.0;
    for (const auto& e : report.entries) {
        max_z = std::max(max_z, e.z);
        max_d = std::max(max_d, e.discrepancy);
    }
    CHECK(max_z > 10.0);
    CHECK(max_d >= 0.09);
    CHECK(std::max(report.max_z(Side::Left), report.max_z(Side::Right)) == max_z);
}

TEST_CASE("identical pair distributions give zero discrepancy") {
    const auto counts = counts_from_rows({{
        {{10, 20, 30, 40}},
        {{10, 20, 30, 40}},
        {{10, 20, 30, 40}},
        {{10, 20, 30, 40}},
    }});
    const auto report = no_signaling_report(counts);
    for (const auto& e : report.entries) {
        CHECK(e.discrepancy == 0.0);
        CHECK(e.z == 0.0);
    }
    CHECK(report.max_discrepancy(Side::Left) == 0.0);
    CHECK(report.max_discrepancy(Side::Right) == 0.0);
}
