#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "ones/baselines.hpp"
#include "ones/cluster_sim.hpp"
#include "ones/evolution.hpp"
#include "ones/micro_oracle.hpp"
#include "ones/objective.hpp"
#include "ones/scheduler.hpp"
#include "ones/traces.hpp"

namespace fs = std::filesystem;
using namespace ones;

namespace {

struct CommonOptions {
  std::string trace_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::int32_t gpus = 0;  // 0: use the trace header
  std::int32_t gpus_per_node = 4;

  // evolution
  std::int32_t population = 0;
  double theta = 0.2;
  std::int32_t generations = 50;
  int rho_draws = 1;
  bool beta_mean = false;

  // predictor
  std::size_t buffer_cap = 2048;
  std::size_t per_job_quota = 32;
  double default_beta = 4.0;

  // scaling policy
  double sigma = 0.0;  // 0: bind to the arrival-rate estimate
  std::int64_t warmup_epochs = 1;

  // simulator
  double elastic_overhead = 1.0;
  double checkpoint_overhead = 20.0;
  std::string overhead_mode = "auto";
  double inefficiency = 1.0;
  double critical_batch_factor = 8.0;
  double evolution_compute = 0.0;

  // baselines
  double srpt_interval = 600.0;
  std::vector<double> las_thresholds = {1e3, 1e4, 1e5};

  std::string evolution_log;
};

void add_common_options(CLI::App* cmd, CommonOptions& opt, bool with_trace) {
  if (with_trace)
    cmd->add_option("--trace", opt.trace_path, "input trace file")
        ->required()
        ->envname("ONES_TRACE");
  cmd->add_option("-o,--out", opt.out_dir, "output directory")
      ->envname("ONES_OUT");
  cmd->add_option("--seed", opt.seed, "root seed for every random stream")
      ->envname("ONES_SEED");
  cmd->add_option("--gpus", opt.gpus, "total GPUs (default: trace header)")
      ->envname("ONES_GPUS");
  cmd->add_option("--gpus-per-node", opt.gpus_per_node, "GPUs per node")
      ->envname("ONES_GPUS_PER_NODE");
  cmd->add_option("--population", opt.population,
                  "population size (0 = one per GPU)")
      ->envname("ONES_POPULATION");
  cmd->add_option("--theta", opt.theta, "mutation rate")
      ->envname("ONES_THETA");
  cmd->add_option("--generations", opt.generations,
                  "evolution generations per deployment")
      ->envname("ONES_GENERATIONS");
  cmd->add_option("--rho-draws", opt.rho_draws,
                  "progress draws averaged per job per selection")
      ->envname("ONES_RHO_DRAWS");
  cmd->add_flag("--beta-mean", opt.beta_mean,
                "score candidates at Beta means instead of draws")
      ->envname("ONES_BETA_MEAN");
  cmd->add_option("--buffer-cap", opt.buffer_cap, "predictor buffer size")
      ->envname("ONES_BUFFER_CAP");
  cmd->add_option("--per-job-quota", opt.per_job_quota,
                  "predictor samples kept per completed job")
      ->envname("ONES_PER_JOB_QUOTA");
  cmd->add_option("--default-beta", opt.default_beta,
                  "beta used before the first fit")
      ->envname("ONES_DEFAULT_BETA");
  cmd->add_option("--sigma", opt.sigma,
                  "scale-down rate (0 = bind to arrival-rate estimate)")
      ->envname("ONES_SIGMA");
  cmd->add_option("--warmup-epochs", opt.warmup_epochs,
                  "epochs before the batch limit may grow")
      ->envname("ONES_WARMUP_EPOCHS");
  cmd->add_option("--elastic-overhead", opt.elastic_overhead,
                  "seconds charged per elastic rescale")
      ->envname("ONES_ELASTIC_OVERHEAD");
  cmd->add_option("--checkpoint-overhead", opt.checkpoint_overhead,
                  "seconds charged per checkpoint-based rescale")
      ->envname("ONES_CHECKPOINT_OVERHEAD");
  cmd->add_option("--overhead-mode", opt.overhead_mode,
                  "auto | elastic | checkpoint")
      ->check(CLI::IsMember({"auto", "elastic", "checkpoint"}))
      ->envname("ONES_OVERHEAD_MODE");
  cmd->add_option("--inefficiency", opt.inefficiency,
                  "progress slowdown factor above the critical batch")
      ->envname("ONES_INEFFICIENCY");
  cmd->add_option("--critical-batch-factor", opt.critical_batch_factor,
                  "critical batch as a multiple of the initial batch")
      ->envname("ONES_CRITICAL_BATCH_FACTOR");
  cmd->add_option("--evolution-compute", opt.evolution_compute,
                  "simulated seconds of search compute charged per deployment")
      ->envname("ONES_EVOLUTION_COMPUTE");
  cmd->add_option("--srpt-interval", opt.srpt_interval,
                  "rescheduling interval of the srpt baseline, seconds")
      ->envname("ONES_SRPT_INTERVAL");
  cmd->add_option("--las-thresholds", opt.las_thresholds,
                  "attained-service queue boundaries, GPU-seconds")
      ->delimiter(',')
      ->envname("ONES_LAS_THRESHOLDS");
  cmd->add_option("--evolution-log", opt.evolution_log,
                  "per-generation log file (ones scheduler only)")
      ->envname("ONES_EVOLUTION_LOG");
}

ClusterSpec resolve_cluster(const CommonOptions& opt, const TraceFile& trace) {
  if (opt.gpus <= 0) return trace.cluster;
  if (opt.gpus % opt.gpus_per_node != 0)
    throw CLI::ValidationError("--gpus must be a multiple of --gpus-per-node");
  return {opt.gpus / opt.gpus_per_node, opt.gpus_per_node};
}

SimConfig make_sim_config(const CommonOptions& opt, const ClusterSpec& cluster) {
  SimConfig cfg;
  cfg.cluster = cluster;
  cfg.seed = opt.seed;
  cfg.overhead.elastic_scale_seconds = opt.elastic_overhead;
  cfg.overhead.checkpoint_scale_seconds = opt.checkpoint_overhead;
  if (opt.overhead_mode == "elastic") cfg.overhead_mode = OverheadMode::Elastic;
  if (opt.overhead_mode == "checkpoint")
    cfg.overhead_mode = OverheadMode::Checkpoint;
  cfg.policy.sigma = opt.sigma;
  cfg.policy.sigma_auto = opt.sigma <= 0.0;
  cfg.policy.warmup_epochs = opt.warmup_epochs;
  cfg.large_batch_inefficiency = opt.inefficiency;
  cfg.critical_batch_factor = opt.critical_batch_factor;
  cfg.evolution_compute_seconds = opt.evolution_compute;
  return cfg;
}

std::unique_ptr<SchedulerPolicy> make_policy(SchedulerKind kind,
                                             const CommonOptions& opt,
                                             const ClusterSpec& cluster) {
  if (kind == SchedulerKind::Ones) {
    EvolutionConfig evo;
    evo.population_size = opt.population;
    evo.mutation_rate = opt.theta;
    evo.generations_per_round = opt.generations;
    evo.rho_draws = opt.rho_draws;
    evo.score_at_beta_mean = opt.beta_mean;
    PredictorConfig pred;
    pred.buffer_cap = opt.buffer_cap;
    pred.per_job_quota = opt.per_job_quota;
    pred.default_beta = opt.default_beta;
    return std::make_unique<OnesScheduler>(cluster, evo, pred, opt.seed);
  }
  BaselineConfig b;
  b.kind = kind;
  b.reschedule_interval = opt.srpt_interval;
  b.queue_thresholds = opt.las_thresholds;
  return make_baseline(b);
}

struct RunOutput {
  SimResult result;
  Summary summary;
};

RunOutput run_one(SchedulerKind kind, const CommonOptions& opt,
                  const TraceFile& trace, const ClusterSpec& cluster,
                  std::ofstream* evolution_log) {
  auto policy = make_policy(kind, opt, cluster);
  if (evolution_log && kind == SchedulerKind::Ones)
    static_cast<OnesScheduler*>(policy.get())->set_evolution_log(evolution_log);
  auto cfg = make_sim_config(opt, cluster);
  RunOutput out{run(trace.jobs, *policy, cfg), {}};
  out.summary = aggregate(out.result.records);
  return out;
}

void write_run_outputs(const fs::path& dir, const char* name,
                       const RunOutput& run_output) {
  fs::create_directories(dir);
  const auto& res = run_output.result;

  std::ofstream metrics(dir / (std::string(name) + "_metrics.csv"),
                        std::ios::binary);
  write_metrics_csv(metrics, res.records);

  std::ofstream summary(dir / (std::string(name) + "_summary.txt"),
                        std::ios::binary);
  write_summary(summary, name, run_output.summary, res.stats);

  auto curve_of = [&](auto getter, const std::string& metric) {
    std::vector<double> values;
    for (const auto& r : res.records) values.push_back(getter(r));
    std::ofstream out(dir / (std::string(name) + "_cf_" + metric + ".csv"),
                      std::ios::binary);
    write_cf_csv(out, cf_curve(std::move(values)));
  };
  curve_of([](const MetricsRecord& r) { return r.jct; }, "jct");
  curve_of([](const MetricsRecord& r) { return r.execution; }, "execution");
  curve_of([](const MetricsRecord& r) { return r.queuing; }, "queuing");

  std::ofstream audit(dir / (std::string(name) + "_scaling_audit.csv"),
                      std::ios::binary);
  write_audit_header(audit);
  for (const auto& s : res.audit) write_audit_line(audit, s);
}

int cmd_generate(std::int64_t jobs, double lambda, const CommonOptions& opt,
                 const std::string& out_path) {
  auto trace = generate(default_templates(), jobs, lambda, opt.seed);
  trace.cluster = opt.gpus > 0
                      ? ClusterSpec{opt.gpus / opt.gpus_per_node, opt.gpus_per_node}
                      : ClusterSpec{16, 4};
  save_file(trace, out_path);
  std::cout << "wrote " << trace.jobs.size() << " jobs to " << out_path
            << " (lambda " << lambda << ", seed " << opt.seed << ")\n"
            << gpu_time_histogram(trace);
  return 0;
}

int cmd_simulate(const std::string& scheduler, const CommonOptions& opt) {
  auto kind = parse_scheduler_kind(scheduler);
  if (!kind) throw CLI::ValidationError("unknown scheduler '" + scheduler + "'");
  auto trace = load_file(opt.trace_path);
  auto cluster = resolve_cluster(opt, trace);

  std::ofstream evo_log;
  if (!opt.evolution_log.empty()) evo_log.open(opt.evolution_log, std::ios::binary);
  auto out = run_one(*kind, opt, trace, cluster,
                     opt.evolution_log.empty() ? nullptr : &evo_log);
  write_run_outputs(opt.out_dir, to_string(*kind), out);
  write_summary(std::cout, to_string(*kind), out.summary, out.result.stats);
  return 0;
}

int cmd_compare(const std::vector<std::string>& schedulers,
                const CommonOptions& opt) {
  if (schedulers.size() < 2)
    throw CLI::ValidationError("compare needs at least 2 schedulers");
  auto trace = load_file(opt.trace_path);
  auto cluster = resolve_cluster(opt, trace);

  struct Row {
    std::string name;
    Summary summary;
  };
  std::vector<Row> rows;
  for (const auto& name : schedulers) {
    auto kind = parse_scheduler_kind(name);
    if (!kind) throw CLI::ValidationError("unknown scheduler '" + name + "'");
    auto out = run_one(*kind, opt, trace, cluster, nullptr);
    write_run_outputs(opt.out_dir, to_string(*kind), out);
    rows.push_back({to_string(*kind), out.summary});
  }

  double ones_mean = 0.0;
  bool have_ones = false;
  for (const auto& r : rows)
    if (r.name == "ones") {
      ones_mean = r.summary.jct.mean;
      have_ones = true;
    }

  fs::create_directories(opt.out_dir);
  std::ofstream csv(fs::path(opt.out_dir) / "compare.csv", std::ios::binary);
  csv << "scheduler,jct_mean,jct_median,queuing_mean,execution_mean,"
         "ones_improvement_pct\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %12s %12s %12s %12s %14s\n", "scheduler",
                "jct_mean", "jct_median", "queue_mean", "exec_mean",
                "ones_gain_%");
  std::cout << buf;
  for (const auto& r : rows) {
    double improvement =
        have_ones && r.summary.jct.mean > 0.0
            ? (r.summary.jct.mean - ones_mean) / r.summary.jct.mean * 100.0
            : 0.0;
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.4f\n",
                  r.name.c_str(), r.summary.jct.mean, r.summary.jct.median,
                  r.summary.queuing.mean, r.summary.execution.mean, improvement);
    csv << buf;
    std::snprintf(buf, sizeof buf, "%-10s %12.2f %12.2f %12.2f %12.2f %14.2f\n",
                  r.name.c_str(), r.summary.jct.mean, r.summary.jct.median,
                  r.summary.queuing.mean, r.summary.execution.mean, improvement);
    std::cout << buf;
  }
  return 0;
}

int cmd_oracle(std::int32_t gpus, std::int32_t jobs, std::int32_t options,
               std::int32_t generations, const CommonOptions& opt) {
  if (gpus > kOracleMaxGpus || jobs > kOracleMaxJobs ||
      options > kOracleMaxBatchOptions) {
    std::cerr << "oracle instances are limited to " << kOracleMaxGpus
              << " gpus, " << kOracleMaxJobs << " jobs, "
              << kOracleMaxBatchOptions << " batch options\n";
    return 2;
  }
  auto inst = make_micro_instance(gpus, jobs, options, opt.seed);
  ProgressModel model;
  auto oracle = brute_force_optimum(inst, model);

  auto ctx = make_evolve_context(inst.cluster, inst.jobs, model,
                                 packed_throughput_fn(inst.cluster), 0.0);
  EvolutionConfig cfg;
  cfg.population_size = opt.population > 0 ? opt.population : 4;
  cfg.mutation_rate = opt.theta;
  cfg.score_at_beta_mean = true;
  Rng rng(derive_seed(opt.seed, 1));
  auto pop = init_population(ctx, cfg, rng);
  auto rho = mean_rho(inst.jobs, model);
  double best = std::numeric_limits<double>::infinity();
  int rounds_used = 0;
  for (int round = 0; round < generations; ++round) {
    pop = evolve_round(pop, ctx, cfg, derive_seed(opt.seed, 100 + round));
    for (const auto& g : pop.members)
      best = std::min(best,
                      utilization_score(g, inst.jobs, ctx.throughput_fn, rho));
    rounds_used = round + 1;
    if (best <= oracle.best_score * (1.0 + 1e-12)) break;
  }

  bool matched = best <= oracle.best_score * (1.0 + 1e-9);
  std::cout << "instance: " << gpus << " gpus, " << jobs << " jobs, seed "
            << opt.seed << "\n";
  std::cout << "enumerated " << oracle.enumerated << " schedules\n";
  std::cout << "optimum score: " << oracle.best_score << " (gpu split:";
  for (auto c : oracle.best_gpus) std::cout << " " << c;
  std::cout << ")\n";
  std::cout << "evolution best: " << best << " after " << rounds_used
            << " generations\n";
  std::cout << "evolution reached the optimum: " << (matched ? "yes" : "no")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-driven GPU-cluster scheduling simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; [section] per subcommand");

  CommonOptions opt;

  auto* gen = app.add_subcommand("generate", "generate a workload trace");
  std::int64_t gen_jobs = 400;
  double gen_lambda = 0.08;
  std::string gen_out;
  gen->add_option("--jobs", gen_jobs, "number of jobs")->envname("ONES_JOBS");
  gen->add_option("--lambda", gen_lambda, "arrival rate, jobs/second")
      ->envname("ONES_LAMBDA");
  gen->add_option("-o,--out", gen_out, "output trace path")->required();
  gen->add_option("--seed", opt.seed, "generation seed")->envname("ONES_SEED");
  gen->add_option("--gpus", opt.gpus, "cluster size recorded in the header");
  gen->add_option("--gpus-per-node", opt.gpus_per_node, "GPUs per node");

  auto* sim = app.add_subcommand("simulate", "run one scheduler on a trace");
  std::string sim_scheduler = "ones";
  sim->add_option("--scheduler", sim_scheduler, "ones | fifo | las | srpt")
      ->envname("ONES_SCHEDULER");
  add_common_options(sim, opt, true);

  auto* cmp = app.add_subcommand("compare", "run several schedulers on a trace");
  std::vector<std::string> cmp_schedulers;
  cmp->add_option("--schedulers", cmp_schedulers,
                  "comma-separated scheduler list")
      ->required()
      ->delimiter(',');
  add_common_options(cmp, opt, true);

  auto* orc = app.add_subcommand(
      "oracle", "brute-force optimum check on a micro instance");
  std::int32_t orc_gpus = 4, orc_jobs = 3, orc_options = 3,
               orc_generations = 200;
  orc->add_option("--gpus", orc_gpus, "cluster size (max 4)");
  orc->add_option("--jobs", orc_jobs, "job count (max 3)");
  orc->add_option("--options", orc_options, "batch options per job (max 3)");
  orc->add_option("--generations", orc_generations, "evolution budget");
  orc->add_option("--seed", opt.seed, "instance seed")->envname("ONES_SEED");
  orc->add_option("--population", opt.population, "population size");
  orc->add_option("--theta", opt.theta, "mutation rate");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_generate(gen_jobs, gen_lambda, opt, gen_out);
    if (sim->parsed()) return cmd_simulate(sim_scheduler, opt);
    if (cmp->parsed()) return cmd_compare(cmp_schedulers, opt);
    if (orc->parsed())
      return cmd_oracle(orc_gpus, orc_jobs, orc_options, orc_generations, opt);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
