#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "xview/errors.hpp"

namespace {

void add_weight_flags(CLI::App* app, xview::EnergyWeights* weights) {
  app->add_option("--w1", weights->w1, "spatial energy weight");
  app->add_option("--w2", weights->w2, "appearance energy weight");
  app->add_option("--w3", weights->w3, "action energy weight");
  app->add_option("--w4", weights->w4, "attribute energy weight");
  app->add_option("--xi", weights->xi, "per-attribute mismatch penalty");
  app->add_option("--eps-prob", weights->eps_prob, "probability floor inside logs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-view joint parsing of multi-camera proposals"};
  app.set_config("--config", "", "read flags from an INI config file (flags override it)");
  app.require_subcommand(1);

  xview::cmd::SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic scene");
  simulate->add_option("--scene-config", sim.config_path,
                       "scene + noise JSON config (defaults built in)");
  simulate->add_option("--seed", sim.seed, "rng seed");
  simulate->add_option("--out", sim.out_dir, "output directory")->required();
  simulate->add_option("--ontology", sim.ontology_path, "ontology file (default built-in)");
  simulate->add_flag("--emit-prior", sim.emit_prior,
                     "fit a prior on the ground truth and write prior.json");
  simulate->add_option("--alpha", sim.prior_alpha, "prior smoothing for --emit-prior");

  xview::cmd::ParseOptions parse;
  CLI::App* parse_cmd = app.add_subcommand("parse", "joint parsing of proposals");
  parse_cmd->add_option("--ontology", parse.ontology, "ontology file (default built-in)");
  parse_cmd->add_option("--proposals", parse.proposals, "proposals JSONL")->required();
  parse_cmd->add_option("--calib", parse.calib, "calibration JSONL")->required();
  parse_cmd->add_option("--prior", parse.prior, "'uniform' or a prior file");
  add_weight_flags(parse_cmd, &parse.weights);
  parse_cmd->add_option("--iters", parse.iters, "sampler iterations per round");
  parse_cmd->add_option("--seed", parse.seed, "rng seed");
  parse_cmd->add_option("--chains", parse.chains, "parallel chains (best kept)");
  parse_cmd->add_option("--conv-window", parse.conv_window,
                        "stop a round after this many consecutive rejections (0 = off)");
  parse_cmd->add_option("--rounds", parse.rounds, "max alternation rounds");
  parse_cmd->add_option("--conv-eps", parse.conv_eps, "round improvement threshold");
  parse_cmd->add_option("--det-thresh", parse.det_thresh, "detection score threshold");
  parse_cmd->add_option("--out", parse.out, "hierarchy output file")->required();
  parse_cmd->add_option("--trace", parse.trace, "sampler trace output (JSONL)");

  xview::cmd::OracleOptions oracle;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "exhaustive MAP on tiny inputs");
  oracle_cmd->add_option("--ontology", oracle.ontology, "ontology file (default built-in)");
  oracle_cmd->add_option("--proposals", oracle.proposals, "proposals JSONL")->required();
  oracle_cmd->add_option("--calib", oracle.calib, "calibration JSONL")->required();
  oracle_cmd->add_option("--prior", oracle.prior, "'uniform' or a prior file");
  add_weight_flags(oracle_cmd, &oracle.weights);
  oracle_cmd->add_option("--det-thresh", oracle.det_thresh, "detection score threshold");
  oracle_cmd->add_option("--max-tracklets", oracle.max_tracklets,
                         "refuse inputs with more tracklets than this");
  oracle_cmd->add_option("--out", oracle.out, "hierarchy output file")->required();

  xview::cmd::EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a parse against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "predicted hierarchy file")->required();
  eval_cmd->add_option("--gt", eval.gt, "ground-truth hierarchy file")->required();
  eval_cmd->add_option("--out", eval.out, "write the report as JSON");
  eval_cmd->add_option("--iou", eval.iou, "IoU match threshold");

  xview::cmd::BenchOptions bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "throughput on the standard workload");
  bench_cmd->add_option("--seed", bench.seed, "rng seed");
  bench_cmd->add_option("--iters", bench.iters, "sampler iterations per round");
  bench_cmd->add_option("--rounds", bench.rounds, "alternation rounds");
  bench_cmd->add_option("--out", bench.out, "write the result as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto r = xview::cmd::cmd_simulate(sim);
      std::printf("wrote %s (%zu records)\n", r.proposals.c_str(), r.records);
      std::printf("wrote %s\n", r.calibration.c_str());
      std::printf("wrote %s (%zu rows)\n", r.ground_truth.c_str(), r.gt_rows);
      std::printf("wrote %s\n", r.ontology.c_str());
      if (!r.prior.empty()) std::printf("wrote %s\n", r.prior.c_str());
    } else if (*parse_cmd) {
      const auto r = xview::cmd::cmd_parse(parse);
      std::printf("log posterior %.6f, %d scene entities, %d round(s), %d projected box(es)\n",
                  r.log_posterior, r.scene_entities, r.rounds_run, r.projected_boxes);
      std::printf("parsed %d frames in %.3f s (%.2f fps)\n", r.frames, r.seconds,
                  r.seconds > 0 ? r.frames / r.seconds : 0.0);
    } else if (*oracle_cmd) {
      const auto r = xview::cmd::cmd_oracle(oracle);
      std::printf("exact MAP log posterior %.6f over %ld structures, %d scene entities\n",
                  r.log_posterior, r.partitions, r.scene_entities);
    } else if (*eval_cmd) {
      const auto report = xview::cmd::cmd_eval(eval);
      std::fputs(xview::report_table(report).c_str(), stdout);
    } else if (*bench_cmd) {
      const auto r = xview::cmd::cmd_bench(bench);
      std::printf("processed %d frames (%d cameras, %d entities) in %.3f s: %.2f frames/s\n",
                  r.frames, r.cameras, r.entities, r.seconds, r.fps);
    }
  } catch (const xview::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
