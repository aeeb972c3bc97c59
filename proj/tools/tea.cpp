// Command-line front end: corpus generation, training, evaluation and reports.

#include "tea/checkpoint.hpp"
#include "tea/config.hpp"
#include "tea/errors.hpp"
#include "tea/metrics.hpp"
#include "tea/trainer.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

const std::vector<tea::SitsSample>& pick_split(const tea::DatasetSplits& data, const std::string& name) {
  if (name == "train") return data.train;
  if (name == "val") return data.val;
  if (name == "test") return data.test;
  throw tea::ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

struct EvalInputs {
  tea::Checkpoint checkpoint;
  tea::DatasetSplits data;
};

EvalInputs load_for_eval(const std::string& checkpoint_path, const std::string& data_override) {
  EvalInputs in{tea::load_checkpoint(checkpoint_path), {}};
  std::string root = data_override;
  if (root.empty()) root = tea::KeyValueFile::parse(in.checkpoint.meta.run_config).get_string("data", "root", "");
  if (root.empty()) throw tea::ConfigError("no dataset root recorded in the checkpoint; pass --data");
  in.data = tea::load_dataset(root);
  return in;
}

void emit(const tea::EvalReport& report, const std::string& out) {
  if (out.empty()) {
    std::cout << tea::report_to_json(report) << "\n";
  } else {
    tea::save_report(report, out);
    std::cerr << "wrote " << out << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-adaptive SITS segmentation: data generation, training and evaluation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic phenology corpus");
  std::string gen_config, gen_out;
  long long gen_seed = -1;
  int gen_samples = -1;
  gen->add_option("--config", gen_config, "Key/value file with a [generator] section");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Generator seed (overrides the config)");
  gen->add_option("--samples", gen_samples, "Number of samples (overrides the config)");

  auto* train = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  std::string train_config;
  train->add_option("--config", train_config, "Run configuration file")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on prefix crops");
  std::string eval_ckpt, eval_ratios = "0.1..1.0", eval_split = "test", eval_data, eval_out;
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--ratios", eval_ratios, "Comma list or lo..hi range")->capture_default_str();
  eval->add_option("--split", eval_split)->capture_default_str();
  eval->add_option("--data", eval_data, "Dataset root (default: the one recorded in the checkpoint)");
  eval->add_option("--out", eval_out, "Write the report here instead of stdout");

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a checkpoint on sliding windows");
  std::string sweep_ckpt, sweep_lengths = "0.1,0.2,0.4,0.8", sweep_split = "test", sweep_data, sweep_out;
  double sweep_step = 0.1;
  sweep_cmd->add_option("--checkpoint", sweep_ckpt)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--lengths", sweep_lengths)->capture_default_str();
  sweep_cmd->add_option("--step", sweep_step)->capture_default_str();
  sweep_cmd->add_option("--split", sweep_split)->capture_default_str();
  sweep_cmd->add_option("--data", sweep_data);
  sweep_cmd->add_option("--out", sweep_out);

  auto* report = app.add_subcommand("report", "Render an evaluation report");
  std::string report_in, report_label = "model";
  bool as_csv = false, as_table = false;
  report->add_option("--in", report_in)->required()->check(CLI::ExistingFile);
  report->add_option("--label", report_label)->capture_default_str();
  auto* csv_flag = report->add_flag("--csv", as_csv);
  report->add_flag("--table", as_table)->excludes(csv_flag);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      tea::KeyValueFile kv = gen_config.empty() ? tea::KeyValueFile{} : tea::KeyValueFile::load(gen_config);
      kv.apply_environment("TEA");
      tea::GeneratorConfig g = tea::generator_config_from(kv);
      if (gen_seed >= 0) g.seed = static_cast<std::uint64_t>(gen_seed);
      if (gen_samples > 0) g.samples = gen_samples;
      const auto manifest = tea::generate_synthetic_dataset(g.classes, g.geometry, g.samples, g.seed, gen_out);
      std::cout << "wrote " << g.samples << " samples (" << manifest.num_classes << " classes) to " << gen_out << "\n";
    } else if (*train) {
      const tea::RunConfig cfg = tea::load_run_config(train_config);
      const tea::FitResult r = tea::fit(cfg);
      std::cout << "best checkpoint: " << r.best_checkpoint << " (step " << r.best_step << ", val LDIoU "
                << r.best_ldiou << ")\n";
    } else if (*eval) {
      const auto in = load_for_eval(eval_ckpt, eval_data);
      emit(tea::validate(in.checkpoint.student, pick_split(in.data, eval_split), tea::parse_double_list(eval_ratios)),
           eval_out);
    } else if (*sweep_cmd) {
      const auto in = load_for_eval(sweep_ckpt, sweep_data);
      tea::EvalReport r;
      r.sweep = tea::sweep(in.checkpoint.student, pick_split(in.data, sweep_split),
                           tea::parse_double_list(sweep_lengths), sweep_step);
      emit(r, sweep_out);
    } else if (*report) {
      const auto r = tea::load_report(report_in);
      std::cout << (as_csv ? tea::report_to_csv(r) : as_table ? tea::report_to_table(r, report_label)
                                                             : tea::report_to_json(r) + "\n");
    }
  } catch (const tea::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
