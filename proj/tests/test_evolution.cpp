#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "ones/evolution.hpp"
#include "ones/micro_oracle.hpp"
#include "test_util.hpp"

using namespace ones;
using test::make_genome;
using test::make_job;
using test::set_running;

namespace {

EvolveContext context_for(const ClusterSpec& cluster, const JobTable& jobs,
                          const ProgressModel& model, double now = 1000.0,
                          std::vector<JobId> new_jobs = {}) {
  return make_evolve_context(cluster, jobs, model, packed_throughput_fn(cluster),
                             now, std::move(new_jobs));
}

}  // namespace

TEST_CASE("reorder packs workers by first occurrence") {
  auto g = make_genome({{1, 10}, {0, 20}, {1, 11}, {0, 21}});
  auto r = reorder(g);
  CHECK(r == make_genome({{1, 10}, {1, 11}, {0, 20}, {0, 21}}));
  CHECK(reorder(r) == r);  // idempotent

  auto holes = make_genome({{}, {0, 5}, {}, {0, 6}});
  CHECK(reorder(holes) == make_genome({{0, 5}, {0, 6}, {}, {}}));
}

TEST_CASE("reorder preserves each job's local batch multiset") {
  Rng rng(3);
  std::uniform_int_distribution<int> pick(-1, 3);
  std::uniform_int_distribution<std::int64_t> batch(1, 64);
  for (int trial = 0; trial < 100; ++trial) {
    Genome g(10);
    for (auto& s : g.slots) {
      int j = pick(rng);
      if (j >= 0) s = GenomeSlot{j, batch(rng)};
    }
    auto r = reorder(g);
    for (JobId id = 0; id < 4; ++id) {
      auto collect = [id](const Genome& x) {
        std::multiset<std::int64_t> out;
        for (const auto& s : x.slots)
          if (s.job == id) out.insert(s.local_batch);
        return out;
      };
      CHECK(collect(g) == collect(r));
    }
    // idle slots all trail the occupied ones
    bool seen_idle = false;
    for (const auto& s : r.slots) {
      if (s.idle()) seen_idle = true;
      else CHECK(!seen_idle);
    }
  }
}

TEST_CASE("crossover mixes per slot and repairs limits") {
  Rng rng(17);
  auto p1 = make_genome({{0, 8}, {0, 8}, {1, 16}, {1, 16}});
  auto p2 = make_genome({{2, 4}, {2, 4}, {3, 32}, {3, 32}});

  // multiset conservation per slot, before repair
  for (int trial = 0; trial < 50; ++trial) {
    auto [c1, c2] = crossover_mix(p1, p2, rng);
    for (std::size_t i = 0; i < p1.size(); ++i) {
      bool straight = c1.slots[i] == p1.slots[i] && c2.slots[i] == p2.slots[i];
      bool swapped = c1.slots[i] == p2.slots[i] && c2.slots[i] == p1.slots[i];
      CHECK((straight || swapped));
    }
  }

  JobTable jobs;
  for (JobId id = 0; id < 4; ++id) {
    auto job = make_job(id, 64, 64);  // tight limits force repair
    set_running(job, 32, 1, 1000.0);
    jobs.emplace(id, std::move(job));
  }
  ProgressModel model;
  auto ctx = context_for({1, 4}, jobs, model);

  // identical parents reproduce themselves
  auto packed = reorder(p1);
  auto [s1, s2] = uniform_crossover(packed, packed, ctx, rng);
  CHECK(s1 == packed);
  CHECK(s2 == packed);

  for (int trial = 0; trial < 100; ++trial) {
    auto [c1, c2] = uniform_crossover(p1, p2, ctx, rng);
    CHECK(!validate(c1, jobs));
    CHECK(!validate(c2, jobs));
  }
}

TEST_CASE("mutation preempts at the configured frequency") {
  JobTable jobs;
  for (JobId id = 0; id < 4; ++id) {
    auto job = make_job(id, 512, 512);
    set_running(job, 256, 1, 5000.0);
    jobs.emplace(id, std::move(job));
  }
  ProgressModel model;
  auto ctx = context_for({1, 4}, jobs, model);
  auto g = reorder(make_genome({{0, 256}, {1, 256}, {2, 256}, {3, 256}}));

  Rng rng(23);
  // theta ~ 0: nothing changes
  CHECK(uniform_mutation(g, ctx, 1e-9, rng) == g);

  // theta ~ 1: every job preempted
  std::vector<JobId> preempted;
  uniform_mutation(g, ctx, 1.0 - 1e-12, rng, &preempted);
  CHECK(preempted.size() == 4);

  // preemption frequency over many trials approaches theta
  int hits = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    preempted.clear();
    uniform_mutation(g, ctx, 0.2, rng, &preempted);
    hits += static_cast<int>(preempted.size());
  }
  double freq = static_cast<double>(hits) / (4.0 * trials);
  CHECK(freq == doctest::Approx(0.2).epsilon(0.1));  // 0.2 +- 0.02

  // outputs always valid
  for (int t = 0; t < 100; ++t)
    CHECK(!validate(uniform_mutation(g, ctx, 0.5, rng), jobs));
}

TEST_CASE("refresh clears completed jobs and refills the cluster") {
  JobTable jobs;
  auto done = make_job(0, 512, 1024);
  set_running(done, 256, 2, 50000.0);
  done.rt.status = JobStatus::Completed;
  auto live = make_job(1, 512, 2048);  // room to grow
  set_running(live, 256, 2, 5000.0);
  jobs.emplace(0, std::move(done));
  jobs.emplace(1, std::move(live));
  ProgressModel model;
  auto ctx = context_for({1, 4}, jobs, model);

  Rng rng(5);
  auto g = refresh(make_genome({{0, 128}, {0, 128}, {1, 128}, {1, 128}}), ctx, rng);
  CHECK(gpu_count_of(g, 0) == 0);
  CHECK(idle_slots(g).empty());  // freed GPUs were refilled
  CHECK(!validate(g, jobs));
}

TEST_CASE("refresh scale-down removes floor(R*c/B) of the GPUs") {
  JobTable jobs;
  auto job = make_job(0, 512, 512);  // R=512 < B=1024
  set_running(job, 1024, 4, 9000.0);
  jobs.emplace(0, std::move(job));
  ProgressModel model;
  auto ctx = context_for({1, 4}, jobs, model);

  Rng rng(6);
  auto g = refresh(make_genome({{0, 256}, {0, 256}, {0, 256}, {0, 256}}), ctx, rng);
  // remove c - floor(R*c/B) = 4 - 2 GPUs, rescale to min(B, R) = 512
  CHECK(gpu_count_of(g, 0) == 2);
  CHECK(global_batch_of(g, 0) == 512);
  CHECK(!validate(g, jobs));
}

TEST_CASE("refresh grants new arrivals one GPU, evicting the longest runner") {
  JobTable jobs;
  auto big = make_job(0, 512, 4096);
  set_running(big, 768, 3, 90000.0, 5000.0);  // the eviction victim
  jobs.emplace(0, std::move(big));
  for (JobId id : {1, 2}) {
    auto fresh = make_job(id, 512, 256);
    fresh.spec.arrival_time = 900.0 + id;
    fresh.rt.status = JobStatus::Waiting;
    jobs.emplace(id, std::move(fresh));
  }
  ProgressModel model;
  auto ctx = context_for({1, 4}, jobs, model, 1000.0, {1, 2});

  Rng rng(8);
  auto g = refresh(make_genome({{0, 256}, {0, 256}, {0, 256}, {}}), ctx, rng);
  CHECK(gpu_count_of(g, 1) == 1);
  CHECK(gpu_count_of(g, 2) == 1);
  CHECK(gpu_count_of(g, 0) == 2);  // shrank by one for the second newcomer
  CHECK(!validate(g, jobs));
}

TEST_CASE("init population covers the cluster with arrived jobs") {
  ProgressModel model;
  JobTable empty_jobs;
  auto empty_ctx = context_for({1, 4}, empty_jobs, model);
  EvolutionConfig cfg;
  cfg.population_size = 3;
  Rng rng(2);
  auto pop = init_population(empty_ctx, cfg, rng);
  REQUIRE(pop.members.size() == 3);
  for (const auto& g : pop.members)
    CHECK(idle_slots(g).size() == 4);  // no jobs -> all idle

  JobTable one;
  auto job = make_job(0, 512, 4096);
  job.rt.status = JobStatus::Waiting;
  one.emplace(0, std::move(job));
  auto ctx = context_for({1, 4}, one, model);
  auto pop1 = init_population(ctx, cfg, rng);
  for (const auto& g : pop1.members) {
    CHECK(gpu_count_of(g, 0) == 4);  // the only job lands everywhere
    CHECK(!validate(g, one));
  }

  // seeded replay is byte-identical
  Rng ra(77), rb(77);
  auto pa = init_population(ctx, cfg, ra);
  auto pb = init_population(ctx, cfg, rb);
  CHECK(pa.members == pb.members);
}

TEST_CASE("default population size matches the cluster") {
  ProgressModel model;
  JobTable jobs;
  auto ctx = context_for({2, 4}, jobs, model);
  Rng rng(1);
  auto pop = init_population(ctx, {}, rng);
  CHECK(pop.members.size() == 8);
}

TEST_CASE("evolve_round keeps K members and never loses the refreshed best") {
  JobTable jobs;
  for (JobId id = 0; id < 3; ++id) {
    auto job = make_job(id, 512, 512 << id);
    set_running(job, 256, 1, 4000.0 + 900.0 * id);
    jobs.emplace(id, std::move(job));
  }
  ProgressModel model;
  auto ctx = context_for({1, 4}, jobs, model);
  EvolutionConfig cfg;
  cfg.population_size = 4;
  cfg.score_at_beta_mean = true;  // deterministic scoring

  Rng rng(4);
  auto pop = init_population(ctx, cfg, rng);
  auto rho = mean_rho(jobs, model);

  for (std::uint64_t round = 0; round < 5; ++round) {
    auto round_seed = derive_seed(1234, round);
    // replay the refresh the round will apply, to get its baseline best
    double refreshed_best = 1e300;
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
      Rng r(derive_seed(round_seed, i));
      auto g = refresh(pop.members[i], ctx, r);
      refreshed_best = std::min(
          refreshed_best, selection_score(g, jobs, ctx.throughput_fn, rho));
    }
    pop = evolve_round(pop, ctx, cfg, round_seed);
    CHECK(pop.members.size() == 4);
    double best = 1e300;
    for (const auto& g : pop.members) {
      CHECK(!validate(g, jobs));
      best = std::min(best, selection_score(g, jobs, ctx.throughput_fn, rho));
    }
    CHECK(best <= refreshed_best + 1e-9);
  }
}

TEST_CASE("evolution reaches the brute-force optimum on a micro instance") {
  auto inst = make_micro_instance(4, 3, 3, 42);
  ProgressModel model;
  auto oracle = brute_force_optimum(inst, model);

  auto ctx = context_for(inst.cluster, inst.jobs, model, 0.0);
  EvolutionConfig cfg;
  cfg.population_size = 4;
  cfg.mutation_rate = 0.2;
  cfg.score_at_beta_mean = true;

  Rng rng(7);
  auto pop = init_population(ctx, cfg, rng);
  auto rho = mean_rho(inst.jobs, model);
  double best = 1e300;
  for (int round = 0; round < 200 && best > oracle.best_score + 1e-12; ++round) {
    pop = evolve_round(pop, ctx, cfg, derive_seed(99, round));
    for (const auto& g : pop.members)
      best = std::min(best,
                      selection_score(g, inst.jobs, ctx.throughput_fn, rho));
  }
  CHECK(best == doctest::Approx(oracle.best_score).epsilon(1e-12));
}

TEST_CASE("should_update waits for every running job's epoch") {
  JobTable jobs;
  auto a = make_job(0);
  set_running(a, 256, 1, 3000.0);
  a.rt.epochs_completed = 3;
  auto b = make_job(1);
  set_running(b, 256, 1, 1500.0);
  b.rt.epochs_completed = 1;
  jobs.emplace(0, std::move(a));
  jobs.emplace(1, std::move(b));

  std::map<JobId, std::int64_t> at_deploy{{0, 2}, {1, 1}};
  CHECK(!should_update(jobs, at_deploy));  // job 1 is mid-first-epoch
  jobs.at(1).rt.epochs_completed = 2;
  CHECK(should_update(jobs, at_deploy));

  // nothing running: true only when someone is waiting
  JobTable idle;
  auto w = make_job(2);
  w.rt.status = JobStatus::Waiting;
  idle.emplace(2, std::move(w));
  CHECK(should_update(idle, {}));
  idle.at(2).rt.status = JobStatus::Completed;
  CHECK(!should_update(idle, {}));
}

TEST_CASE("operator chains always produce valid genomes") {
  Rng rng(31);
  ProgressModel model;
  ClusterSpec cluster{2, 4};

  for (int trial = 0; trial < 50; ++trial) {
    JobTable jobs;
    std::uniform_int_distribution<int> n_jobs(1, 6);
    std::uniform_int_distribution<std::int64_t> limit(1, 2048);
    std::uniform_int_distribution<int> status(0, 2);
    int n = n_jobs(rng);
    std::vector<JobId> fresh;
    for (JobId id = 0; id < n; ++id) {
      auto job = make_job(id, 512, std::max<std::int64_t>(limit(rng), 1));
      switch (status(rng)) {
        case 0:
          job.rt.status = JobStatus::Waiting;
          fresh.push_back(id);
          break;
        case 1:
          set_running(job, std::min<std::int64_t>(job.rt.batch_limit, 256), 1,
                      2000.0 + id * 100.0);
          break;
        default:
          job.rt.status = JobStatus::Completed;
          break;
      }
      jobs.emplace(id, std::move(job));
    }
    auto ctx = context_for(cluster, jobs, model, 1000.0, fresh);
    EvolutionConfig cfg;
    cfg.population_size = 4;
    auto pop = init_population(ctx, cfg, rng);
    Genome g = pop.members[0];
    for (int step = 0; step < 20; ++step) {
      switch (step % 4) {
        case 0: g = refresh(g, ctx, rng); break;
        case 1: g = uniform_crossover(g, pop.members[step % 4], ctx, rng).first; break;
        case 2: g = uniform_mutation(g, ctx, 0.3, rng); break;
        default: g = reorder(g); break;
      }
      auto violation = validate(g, jobs);
      if (violation) FAIL("operator emitted invalid genome: ", violation->reason);
    }
  }
}
