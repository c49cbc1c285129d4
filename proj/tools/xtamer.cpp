// xtamer command line: dataset generation, CNN pretraining, per-user SOM
// calibration, simulated sessions, the HTTP service and report rendering.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "xtamer/cnn.hpp"
#include "xtamer/config.hpp"
#include "xtamer/errors.hpp"
#include "xtamer/face_synth.hpp"
#include "xtamer/server.hpp"
#include "xtamer/session.hpp"
#include "xtamer/som.hpp"
#include "xtamer/text.hpp"

namespace fs = std::filesystem;
using namespace xtamer;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "master seed (overrides the config file)");
  cmd->add_option("--config", c.config, "session config (JSON)")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
}

SessionConfig load_common(const Common& c) {
  SessionConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

std::shared_ptr<const CnnModel> load_cnn(const std::string& flag, const SessionConfig& cfg) {
  const std::string path = !flag.empty() ? flag : cfg.cnn_model.value_or("");
  if (path.empty()) throw std::invalid_argument("no CNN model: pass --cnn or set cnn_model in the config");
  return std::make_shared<const CnnModel>(load_model(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expression learning from trainer rewards on a simulated LED face"};
  app.require_subcommand(1);

  Common gen;
  int per_class = 143, identities = 20;
  double noise = 0.05;
  auto* gen_cmd = app.add_subcommand("gen-data", "render a labeled PGM dataset with manifest.tsv");
  add_common(gen_cmd, gen);
  gen_cmd->add_option("--per-class", per_class, "images per emotion")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--identities", identities, "distinct synthetic identities")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise", noise, "pixel noise standard deviation")->check(CLI::Range(0.0, kMaxNoise));

  Common tc;
  std::string data_dir;
  PretrainOptions popts;
  auto* tc_cmd = app.add_subcommand("train-cnn", "pretrain the CNN encoder on a generated dataset");
  add_common(tc_cmd, tc);
  tc_cmd->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tc_cmd->add_option("--epochs", popts.epochs)->check(CLI::PositiveNumber);
  tc_cmd->add_option("--lr", popts.learning_rate)->check(CLI::NonNegativeNumber);
  tc_cmd->add_option("--batch", popts.batch_size)->check(CLI::PositiveNumber);

  Common ts;
  std::string ts_cnn, ts_profile;
  auto* ts_cmd = app.add_subcommand("train-som", "calibrate a per-user SOM from a simulated profile");
  add_common(ts_cmd, ts);
  ts_cmd->add_option("--cnn", ts_cnn, "CNN checkpoint");
  ts_cmd->add_option("--profile", ts_profile, "user profile (JSON)")->check(CLI::ExistingFile);

  Common sim;
  std::string sim_cnn, sim_profile;
  std::optional<int> sim_epochs, sim_interactions;
  bool resume = false;
  auto* sim_cmd = app.add_subcommand("simulate", "run a full session against a simulated user");
  add_common(sim_cmd, sim);
  sim_cmd->add_option("--cnn", sim_cnn, "CNN checkpoint");
  sim_cmd->add_option("--profile", sim_profile, "user profile (JSON)")->check(CLI::ExistingFile);
  sim_cmd->add_option("--epochs", sim_epochs)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--interactions", sim_interactions, "interactions per epoch")->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--resume", resume, "continue from the checkpoint in --out");

  Common srv;
  std::string srv_cnn, host = "127.0.0.1";
  int port = 8080;
  auto* srv_cmd = app.add_subcommand("serve", "serve the interactive session API");
  add_common(srv_cmd, srv, false);
  srv_cmd->add_option("--cnn", srv_cnn, "CNN checkpoint");
  srv_cmd->add_option("--host", host);
  srv_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));

  Common rep;
  auto* rep_cmd = app.add_subcommand("report", "rebuild the per-epoch table from a session log");
  add_common(rep_cmd, rep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      const auto cfg = load_common(gen);
      const auto m = generate_dataset(gen.out, per_class, identities, noise, cfg.seed);
      std::printf("wrote %zu images to %s\n", m.records.size(), gen.out.c_str());
    } else if (tc_cmd->parsed()) {
      popts.seed = load_common(tc).seed;
      fs::create_directories(tc.out);
      std::ofstream hist(fs::path(tc.out) / "history.tsv");
      hist << "epoch\tloss\taccuracy\n";
      const auto result = pretrain(read_manifest(data_dir), popts, [&](const EpochStats& s) {
        hist << s.epoch << '\t' << text::format_real(s.loss) << '\t' << text::format_real(s.accuracy) << '\n';
        std::printf("epoch %d  loss %.6f  accuracy %.4f\n", s.epoch, s.loss, s.accuracy);
      });
      save_model(fs::path(tc.out) / "cnn.xtm", result.model);
    } else if (ts_cmd->parsed()) {
      auto cfg = load_common(ts);
      if (!ts_profile.empty()) cfg.profile = load_profile(ts_profile);
      Session session(cfg, load_cnn(ts_cnn, cfg));
      SimulatedUser user(resolve_profile(cfg));
      const auto report = session.calibrate(user);
      fs::create_directories(ts.out);
      save_som(fs::path(ts.out) / "som.xtm", session.som());
      std::printf("purity %.4f  quantization_error %.6f  samples %d\n", report.purity, report.quantization_error,
                  report.samples);
    } else if (sim_cmd->parsed()) {
      auto cfg = load_common(sim);
      if (!sim_profile.empty()) cfg.profile = load_profile(sim_profile);
      if (sim_epochs) cfg.epochs = *sim_epochs;
      if (sim_interactions) cfg.interactions_per_epoch = *sim_interactions;
      cfg.validate();
      RunOptions ro;
      ro.resume = resume;
      ro.on_epoch = [](const EpochSummary& s) {
        std::printf("epoch %d  avg_cost %.6f  accuracy %.3f\n", s.epoch, s.avg_cost, s.accuracy);
        std::fflush(stdout);
      };
      const auto r = run_session(cfg, load_cnn(sim_cnn, cfg), sim.out, ro);
      std::printf("calibration purity %.4f; held-out classes correct %d/7 (accuracy %.3f)\n", r.calibration.purity,
                  r.evaluation.classes_correct, r.evaluation.overall_accuracy);
    } else if (srv_cmd->parsed()) {
      const auto cfg = load_common(srv);
      SessionService service(cfg, load_cnn(srv_cnn, cfg));
      std::printf("listening on %s:%d\n", host.c_str(), port);
      std::fflush(stdout);
      serve(service, host, port);
    } else if (rep_cmd->parsed()) {
      const fs::path dir = rep.out;
      SessionConfig cfg = fs::exists(dir / session_files::kConfig) ? load_config(dir / session_files::kConfig)
                                                                   : load_common(rep);
      const auto records = read_session_log(dir / session_files::kLog);
      const std::string table = format_report(summarize_epochs(records, cfg.interactions_per_epoch));
      std::ofstream(dir / session_files::kReport, std::ios::binary | std::ios::trunc) << table;
      std::cout << table;
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
