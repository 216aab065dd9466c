#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedsim/rng.hpp"
#include "fedsim/selection.hpp"

using namespace fedsim;

namespace {

SelectionPolicy policy_with(double t_pref, double alpha, int k = 1, double eps = 0.0) {
    SelectionPolicy p;
    p.kind = PolicyKind::utility_greedy;
    p.participants = k;
    p.epsilon = eps;
    p.preferred_duration = t_pref;
    p.penalty_exponent = alpha;
    return p;
}

Feedback fb(const std::string& id, double utility, long last_round = 0) {
    Feedback f;
    f.client_id = id;
    f.utility = utility;
    f.last_round = last_round;
    return f;
}

} // namespace

TEST_CASE("compute_utility hand-evaluated") {
    // losses [3,4], |B|=2: 2*sqrt((9+16)/2) = 2*sqrt(12.5)
    LocalTrainReport r;
    r.client_id = "a";
    r.sample_count = 2;
    r.per_sample_losses = {3, 4};
    const double base = 2.0 * std::sqrt(12.5);

    SUBCASE("fast client: no system penalty") {
        CHECK(compute_utility(r, 5.0, 1.0, policy_with(10.0, 1.0)) ==
              doctest::Approx(base).epsilon(1e-9));
        CHECK(base == doctest::Approx(7.0711).epsilon(1e-4));
    }
    SUBCASE("slow client at t=2T, alpha=1 halves the utility") {
        CHECK(compute_utility(r, 20.0, 1.0, policy_with(10.0, 1.0)) ==
              doctest::Approx(base * 0.5).epsilon(1e-9));
    }
    SUBCASE("alpha=0 disables the system factor") {
        CHECK(compute_utility(r, 500.0, 1.0, policy_with(10.0, 0.0)) ==
              doctest::Approx(base).epsilon(1e-9));
    }
    SUBCASE("boundary t == T is not penalized") {
        CHECK(compute_utility(r, 10.0, 1.0, policy_with(10.0, 1.0)) ==
              doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("compute_utility input validation") {
    LocalTrainReport r;
    r.sample_count = 1;
    r.per_sample_losses = {1};
    CHECK_THROWS_AS(compute_utility(r, 0.0, 1.0, policy_with(10, 1)), InvalidInput);
    CHECK_THROWS_AS(compute_utility(r, 1.0, 0.0, policy_with(10, 1)), InvalidInput);
}

TEST_CASE("compute_utility is strictly increasing in F") {
    Rng rng(3);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = 1 + rng.uniform_int(50);
        const double sq = rng.uniform(0.1, 100.0);
        const double t = rng.uniform(0.5, 50.0);
        const auto policy = policy_with(rng.uniform(0.5, 20.0), rng.uniform(0.1, 3.0));
        const double f1 = rng.uniform(0.01, 0.99);
        const double f2 = f1 + rng.uniform(0.001, 1.0 - f1);
        CHECK(compute_utility(n, sq, t, f1, policy) < compute_utility(n, sq, t, f2, policy));
    }
}

TEST_CASE("compute_utility is non-increasing in duration") {
    Rng rng(4);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = 1 + rng.uniform_int(50);
        const double sq = rng.uniform(0.1, 100.0);
        const auto policy = policy_with(rng.uniform(0.5, 20.0), rng.uniform(0.0, 3.0));
        const double t1 = rng.uniform(0.5, 50.0);
        const double t2 = t1 + rng.uniform(0.0, 20.0);
        CHECK(compute_utility(n, sq, t1, 1.0, policy) >= compute_utility(n, sq, t2, 1.0, policy));
    }
}

TEST_CASE("select_random basics") {
    const std::vector<std::string> pop{"a", "b", "c", "d"};
    Rng rng(9);
    CHECK(select_random(pop, 4, rng) == std::set<std::string>{"a", "b", "c", "d"});
    Rng r1(5), r2(5);
    CHECK(select_random(pop, 2, r1) == select_random(pop, 2, r2));
    CHECK_THROWS_AS(select_random(pop, 5, rng), CohortTooLarge);
}

TEST_CASE("select_random with K=1 is near-uniform over many draws") {
    const std::vector<std::string> pop{"a", "b", "c", "d"};
    Rng rng(123);
    std::map<std::string, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) counts[*select_random(pop, 1, rng).begin()]++;
    for (const auto& [id, n] : counts)
        CHECK(static_cast<double>(n) / draws == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("select_greedy pure exploitation picks the top-K") {
    std::map<std::string, Feedback> feedback{
        {"a", fb("a", 3)}, {"b", fb("b", 2)}, {"c", fb("c", 1)}};
    Rng rng(1);
    const auto policy = policy_with(0, 1, 2, 0.0);
    CHECK(select_greedy(feedback, {"a", "b", "c"}, policy, rng) ==
          std::set<std::string>{"a", "b"});
}

TEST_CASE("select_greedy breaks utility ties by ascending id") {
    std::map<std::string, Feedback> feedback{{"a", fb("a", 2)}, {"b", fb("b", 2)}};
    Rng rng(1);
    CHECK(select_greedy(feedback, {"a", "b"}, policy_with(0, 1, 1, 0.0), rng) ==
          std::set<std::string>{"a"});
}

TEST_CASE("select_greedy with epsilon=1 reduces to uniform exploration") {
    std::map<std::string, Feedback> feedback{{"a", fb("a", 100)}};
    const std::vector<std::string> pop{"a", "b", "c", "d", "e"};
    Rng rng(77);
    std::map<std::string, int> counts;
    for (int i = 0; i < 4000; ++i) {
        const auto cohort = select_greedy(feedback, pop, policy_with(0, 1, 1, 1.0), rng);
        counts[*cohort.begin()]++;
    }
    // never-selected clients get exploration priority; "a" has participated
    CHECK(counts.count("a") == 0);
    for (const std::string id : {"b", "c", "d", "e"})
        CHECK(static_cast<double>(counts[id]) / 4000 == doctest::Approx(0.25).epsilon(0.12));
}

TEST_CASE("select_greedy matches brute force on random feedback maps") {
    Rng rng(55);
    for (int iter = 0; iter < 40; ++iter) {
        const int n = 2 + static_cast<int>(rng.uniform_int(49));
        std::vector<std::string> pop;
        std::map<std::string, Feedback> feedback;
        for (int i = 0; i < n; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "c%03d", i);
            pop.push_back(buf);
            feedback[buf] = fb(buf, rng.uniform(0, 100), static_cast<long>(rng.uniform_int(10)));
        }
        const int k = 1 + static_cast<int>(rng.uniform_int(n));
        const auto cohort = select_greedy(feedback, pop, policy_with(0, 1, k, 0.0), rng);

        std::vector<std::string> sorted = pop;
        std::sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) {
            if (feedback[a].utility != feedback[b].utility)
                return feedback[a].utility > feedback[b].utility;
            return a < b;
        });
        const std::set<std::string> expect(sorted.begin(), sorted.begin() + k);
        CHECK(cohort == expect);
    }
}

TEST_CASE("select_greedy output is invariant to utility scaling") {
    Rng rng(66);
    std::vector<std::string> pop;
    std::map<std::string, Feedback> feedback, scaled;
    for (int i = 0; i < 20; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "c%02d", i);
        pop.push_back(buf);
        feedback[buf] = fb(buf, rng.uniform(0, 10));
        scaled[buf] = fb(buf, feedback[buf].utility * 37.5);
    }
    Rng r1(8), r2(8);
    const auto policy = policy_with(0, 1, 7, 0.0);
    CHECK(select_greedy(feedback, pop, policy, r1) == select_greedy(scaled, pop, policy, r2));
}

TEST_CASE("select_greedy fills exploration slots from never-selected first") {
    std::map<std::string, Feedback> feedback{{"a", fb("a", 5)}, {"b", fb("b", 4)}};
    const std::vector<std::string> pop{"a", "b", "fresh"};
    Rng rng(2);
    // K=2, eps=0.5: one exploit slot (a), one explore slot -> fresh client
    const auto cohort = select_greedy(feedback, pop, policy_with(0, 1, 2, 0.5), rng);
    CHECK(cohort == std::set<std::string>{"a", "fresh"});
}
