#include <stdexcept>
#include <random>

#include "doctest.h"
#include "ones/objective.hpp"
#include "test_util.hpp"

using namespace ones;
using test::make_genome;
using test::make_job;
using test::set_running;

namespace {

// fixed-rate throughput regardless of configuration
ThroughputFn constant_throughput(double x) {
  return [x](const Job&, std::int64_t, std::int32_t) { return x; };
}

JobTable one_job_table() {
  JobTable jobs;
  auto job = make_job(0, 512, 4096);
  set_running(job, 512, 2, 10000.0);
  jobs.emplace(0, std::move(job));
  return jobs;
}

}  // namespace

TEST_CASE("utilization score follows the remaining-utilization formula") {
  auto jobs = one_job_table();
  RhoDraw rho{{0, 0.5}};
  auto g = make_genome({{0, 256}, {0, 256}, {}, {}});
  // (10000 * 2 / 500) * (1/0.5 - 1) = 40
  CHECK(utilization_score(g, jobs, constant_throughput(500.0), rho) ==
        doctest::Approx(40.0));

  Genome empty(4);
  CHECK(utilization_score(empty, jobs, constant_throughput(500.0), rho) == 0.0);

  // two identical jobs: additivity
  auto job2 = make_job(1, 512, 4096);
  set_running(job2, 512, 2, 10000.0);
  jobs.emplace(1, std::move(job2));
  rho[1] = 0.5;
  auto g2 = make_genome({{0, 256}, {0, 256}, {1, 256}, {1, 256}});
  CHECK(utilization_score(g2, jobs, constant_throughput(500.0), rho) ==
        doctest::Approx(80.0));
}

TEST_CASE("missing rho for a running job is a contract violation") {
  auto jobs = one_job_table();
  auto g = make_genome({{0, 256}, {0, 256}});
  CHECK_THROWS_AS(utilization_score(g, jobs, constant_throughput(500.0), {}),
                  std::logic_error);
}

TEST_CASE("idle slots never change a score") {
  auto jobs = one_job_table();
  RhoDraw rho{{0, 0.3}};
  auto g = make_genome({{0, 256}, {0, 256}});
  auto padded = make_genome({{0, 256}, {0, 256}, {}, {}, {}});
  auto fn = constant_throughput(500.0);
  CHECK(utilization_score(g, jobs, fn, rho) ==
        utilization_score(padded, jobs, fn, rho));
}

TEST_CASE("probability sampling picks the minimal score, ties to low index") {
  auto jobs = one_job_table();
  RhoDraw rho{{0, 0.5}};
  auto fn = constant_throughput(500.0);
  // candidate 0 uses 2 GPUs (score 40), candidate 1 uses 3 (score 60)
  std::vector<Genome> candidates{make_genome({{0, 256}, {0, 256}, {}}),
                                 make_genome({{0, 200}, {0, 200}, {0, 112}})};
  CHECK(&probability_sample_best_with(candidates, jobs, fn, rho) ==
        &candidates[0]);

  std::vector<Genome> identical{candidates[0], candidates[0], candidates[0]};
  CHECK(&probability_sample_best_with(identical, jobs, fn, rho) == &identical[0]);

  CHECK_THROWS_AS(probability_sample_best_with({}, jobs, fn, rho),
                  std::invalid_argument);
}

TEST_CASE("selection agrees with an exhaustive oracle recompute") {
  Rng rng(21);
  JobTable jobs;
  for (JobId id = 0; id < 3; ++id) {
    auto job = make_job(id, 512, 1 << 20);
    set_running(job, 256, 1, 5000.0 + 1000.0 * id);
    jobs.emplace(id, std::move(job));
  }
  RhoDraw rho{{0, 0.2}, {1, 0.5}, {2, 0.8}};
  auto fn = [](const Job& job, std::int64_t batch, std::int32_t gpus) {
    return 100.0 + 5.0 * static_cast<double>(batch) / gpus +
           20.0 * job.spec.id;
  };

  std::vector<Genome> candidates;
  std::uniform_int_distribution<int> pick(-1, 2);
  std::uniform_int_distribution<std::int64_t> batch(1, 512);
  for (int c = 0; c < 12; ++c) {
    Genome g(6);
    for (auto& s : g.slots) {
      int j = pick(rng);
      if (j >= 0) s = GenomeSlot{j, batch(rng)};
    }
    candidates.push_back(std::move(g));
  }

  // independent recompute of every candidate's score from the slot data;
  // jobs a candidate leaves out are charged at their (1 gpu, batch) resume
  // size since all three are running on one gpu here
  std::size_t best_idx = 0;
  double best_score = 1e300;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double score = 0.0;
    for (JobId id = 0; id < 3; ++id) {
      std::int64_t b = 0;
      std::int32_t n = 0;
      for (const auto& s : candidates[c].slots)
        if (s.job == id) {
          b += s.local_batch;
          ++n;
        }
      if (n == 0) {
        b = std::min<std::int64_t>(jobs.at(id).rt.batch_limit, 512);
        n = 1;
      }
      score += jobs.at(id).rt.processed * n / fn(jobs.at(id), b, n) *
               (1.0 / rho.at(id) - 1.0);
    }
    if (score < best_score) {
      best_score = score;
      best_idx = c;
    }
  }
  CHECK(&probability_sample_best_with(candidates, jobs, fn, rho) ==
        &candidates[best_idx]);

  auto scores = score_candidates(candidates, jobs, fn, rho);
  CHECK(scores[best_idx].score == doctest::Approx(best_score));
}

TEST_CASE("select_top_k returns the k smallest, stable by score then index") {
  auto jobs = one_job_table();
  RhoDraw rho{{0, 0.5}};
  auto fn = constant_throughput(500.0);
  std::vector<Genome> candidates;
  for (int c = 5; c >= 1; --c) {  // scores decrease with index
    Genome g(8);
    std::vector<std::int32_t> slots;
    for (int i = 0; i < c; ++i) slots.push_back(i);
    set_job_allocation(g, 0, slots, 512, 512);
    candidates.push_back(std::move(g));
  }
  auto top2 = select_top_k_with(candidates, 2, jobs, fn, rho);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0] == candidates.back());       // 1 GPU, lowest score
  CHECK(top2[1] == candidates[3]);           // 2 GPUs

  CHECK(select_top_k_with(candidates, 99, jobs, fn, rho).size() ==
        candidates.size());

  auto top1 = select_top_k_with(candidates, 1, jobs, fn, rho);
  CHECK(top1[0] == probability_sample_best_with(candidates, jobs, fn, rho));
}

TEST_CASE("throughput scaling divides scores but keeps the argmin") {
  auto jobs = one_job_table();
  RhoDraw rho{{0, 0.4}};
  std::vector<Genome> candidates{make_genome({{0, 256}, {0, 256}, {}}),
                                 make_genome({{0, 170}, {0, 170}, {0, 172}})};
  auto base = [](const Job&, std::int64_t b, std::int32_t c) {
    return 100.0 + 0.3 * b + 10.0 * c;
  };
  for (double lambda : {0.5, 2.0, 7.0}) {
    ThroughputFn scaled = [&, lambda](const Job& j, std::int64_t b,
                                      std::int32_t c) {
      return lambda * base(j, b, c);
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      double s0 = utilization_score(candidates[i], jobs, base, rho);
      double s1 = utilization_score(candidates[i], jobs, scaled, rho);
      CHECK(s1 == doctest::Approx(s0 / lambda));
    }
    CHECK(&probability_sample_best_with(candidates, jobs, scaled, rho) ==
          &probability_sample_best_with(candidates, jobs, base, rho));
  }
}

TEST_CASE("averaging many progress draws approaches the Beta mean") {
  auto jobs = one_job_table();
  ProgressModel model;
  Rng rng(31);
  auto mean = mean_rho(jobs, model).at(0);
  auto single = draw_rho(jobs, model, rng, 1).at(0);
  auto averaged = draw_rho(jobs, model, rng, 2000).at(0);
  CHECK(std::abs(averaged - mean) < std::abs(single - mean) + 0.05);
  CHECK(averaged == doctest::Approx(mean).epsilon(0.05));
}

TEST_CASE("full probability sampling is deterministic under a fixed seed") {
  auto jobs = one_job_table();
  ProgressModel model;
  auto fn = constant_throughput(500.0);
  std::vector<Genome> candidates{make_genome({{0, 256}, {0, 256}, {}}),
                                 make_genome({{0, 512}, {}, {}})};
  Rng a(99), b(99);
  const auto& pick_a = probability_sample_best(candidates, jobs, fn, model, a);
  const auto& pick_b = probability_sample_best(candidates, jobs, fn, model, b);
  CHECK(&pick_a == &pick_b);

  Rng c(99);
  auto rho = draw_rho(jobs, model, c);
  CHECK(&probability_sample_best_with(candidates, jobs, fn, rho) == &pick_a);
}
