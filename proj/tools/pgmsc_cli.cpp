// Command-line front end: gen-synthetic, train, transmit, evaluate,
// inspect-bundle. Exit codes: 0 success, 1 usage, 2 data error, 3 divergence.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pgmsc/error.hpp"
#include "pgmsc/pipeline.hpp"

namespace {

using namespace pgmsc;

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string bundle;
  int n = 1000;
  std::size_t row = 0;
  std::vector<double> snr;
  std::vector<int> discard;
  bool noiseless = false;
  bool random_decompress = false;
  int threads = 0;
};

ExperimentConfig config_of(const Args& a) {
  ExperimentConfig c = a.config.empty() ? ExperimentConfig{} : load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  return c;
}

void print_vector(const char* label, std::span<const double> v) {
  std::printf("%s", label);
  for (double x : v) std::printf(" %.6g", x);
  std::printf("\n");
}

int cmd_gen_synthetic(const Args& a) {
  const auto config = config_of(a);
  const auto spec = default_ground_truth(config);
  const auto ds = gen_synthetic(spec, a.n, a.seed.value_or(config.seed));
  save_dataset(ds, a.out);
  std::printf("wrote %d rows (F=%d, D=%d) to %s\n", a.n, ds.schema().num_features(), ds.schema().total_dim(),
              a.out.c_str());
  return 0;
}

int cmd_train(const Args& a) {
  const auto config = config_of(a);
  const auto ds = load_dataset(a.data, config.schema());
  const auto bundle = train_all(config, ds);
  save_bundle(bundle, a.out);
  std::printf("trained on %zu rows: %zu edges, retained %zu of %d features, %zu codec lengths -> %s\n", ds.size(),
              bundle.network.dag().num_edges(), bundle.profile.retained.size(), bundle.schema.num_features(),
              bundle.coder.pairs().size(), a.out.c_str());
  return 0;
}

int cmd_transmit(const Args& a) {
  const auto bundle = load_bundle(a.bundle);
  const auto ds = load_dataset(a.data, bundle.schema);
  if (a.row >= ds.size()) throw Error(Errc::invalid_argument, "--row out of range");
  const double snr = a.snr.empty() ? bundle.config.snr_grid.front() : a.snr.front();
  const int n_discard = a.discard.empty() ? bundle.config.n_discard : a.discard.front();
  TransmitOptions opts;
  opts.noiseless = a.noiseless;
  opts.random_decompress = a.random_decompress;
  opts.tau = bundle.config.tau;
  const auto& v = ds.row(a.row);
  const auto r = transmit_one(bundle, v, snr, n_discard, a.seed.value_or(bundle.config.seed), opts);

  std::printf("snr_db %s  n_discard %d  decoder %s\n", a.noiseless ? "noiseless" : std::to_string(snr).c_str(),
              n_discard, a.random_decompress ? "random" : "pgm");
  std::printf("kept features:");
  for (int f : r.trace.packet.kept_indices) std::printf(" %d", f);
  std::printf("\npayload length %zu, channel symbols %zu, scale %.6g\n", r.trace.packet.payload.size(),
              r.trace.channel.x_sent.size(), r.trace.channel.scale);
  for (const auto& round : r.trace.discard_rounds) {
    std::printf("discard round: dropped %d (weighted %.6g)\n", round.discarded, round.weighted);
  }
  for (const auto& round : r.trace.recovery_rounds) {
    double p = 0.0;
    for (std::size_t i = 0; i < round.candidates.size(); ++i)
      if (round.candidates[i] == round.committed) p = round.map[i].probability;
    std::printf("recovery round: committed %d (MAP prob %.6g)\n", round.committed, p);
  }
  std::printf("states true:");
  for (int s : r.states_true.states) std::printf(" %d", s);
  std::printf("\nstates hat: ");
  for (int s : r.states_hat.states) std::printf(" %d", s);
  const double m = mse(v.values(), r.v_hat.values());
  std::printf("\nmse %.6g  psnr_db %.6g\n", m, psnr_from_mse(m, bundle.value_range));
  if (!a.out.empty()) {
    save_dataset(Dataset(bundle.schema, {r.v_hat}), a.out);
  } else {
    print_vector("v_hat:", r.v_hat.values());
  }
  return 0;
}

int cmd_evaluate(const Args& a) {
  const auto bundle = load_bundle(a.bundle);
  const auto ds = load_dataset(a.data, bundle.schema);
  std::vector<double> snr = a.snr.empty() ? bundle.config.snr_grid : a.snr;
  if (a.noiseless) snr = {kNoiselessSnr};
  const std::vector<int> discard = a.discard.empty() ? std::vector<int>{bundle.config.n_discard} : a.discard;
  EvalOptions opts;
  opts.threads = a.threads;
  const auto reports = evaluate_grid(bundle, ds, snr, discard, a.seed.value_or(bundle.config.seed), opts);
  if (!a.out.empty()) save_reports_csv(a.out, reports);
  print_summary(std::cout, reports);
  return 0;
}

int cmd_inspect(const Args& a) {
  const auto b = load_bundle(a.bundle);
  std::printf("format version %u\n", b.format_version);
  std::printf("schema: F=%d, D=%d, block dims:", b.schema.num_features(), b.schema.total_dim());
  for (int d : b.schema.block_dims()) std::printf(" %d", d);
  std::printf("\ncardinalities:");
  for (int k : b.codebook.cardinalities()) std::printf(" %d", k);
  std::printf("\nnetwork: %zu edges\n", b.network.dag().num_edges());
  for (const auto& e : b.network.dag().edges()) std::printf("  %d -> %d\n", e.parent, e.child);
  std::printf("importance:");
  for (double x : b.profile.importance) std::printf(" %.4g", x);
  std::printf("\nretained:");
  for (int f : b.profile.retained) std::printf(" %d", f);
  std::printf("\nvalue range %.6g\n", b.value_range);
  std::printf("channel codecs (m -> k, params, final loss):\n");
  for (const auto& [m, p] : b.coder.pairs()) {
    auto it = b.coder.records().find(m);
    std::printf("  %d -> %d  %s  %zu  %s\n", m, p.k, arch_name(p.arch), p.num_params(),
                it == b.coder.records().end() ? "-" : std::to_string(it->second.final_loss).c_str());
  }
  std::printf("config:\n%s\n", config_to_json(b.config).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PGM-based semantic communication simulator"};
  app.require_subcommand(1);
  Args a;

  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", a.seed, "Master seed (overrides the config)");
  };

  auto* gen = app.add_subcommand("gen-synthetic", "Sample a latent dataset from the default synthetic generator");
  gen->add_option("--config", a.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  add_seed(gen);
  gen->add_option("--n", a.n, "Number of rows")->check(CLI::PositiveNumber);
  gen->add_option("--out", a.out, "Output CSV")->required();

  auto* train = app.add_subcommand("train", "Fit quantizer, network, importance profile and channel coders");
  train->add_option("--config", a.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  add_seed(train);
  train->add_option("--data", a.data, "Training CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", a.out, "Output bundle")->required();

  auto* tx = app.add_subcommand("transmit", "Send one row through compression, channel and recovery");
  tx->add_option("--bundle", a.bundle, "Model bundle")->required()->check(CLI::ExistingFile);
  tx->add_option("--data", a.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  tx->add_option("--row", a.row, "Row index");
  tx->add_option("--snr", a.snr, "SNR in dB")->expected(1);
  tx->add_option("--discard", a.discard, "Number of features to discard")->expected(1);
  tx->add_flag("--noiseless", a.noiseless, "Bypass channel noise");
  tx->add_flag("--random-decompress", a.random_decompress, "Fill missing features with random centers");
  add_seed(tx);
  tx->add_option("--out", a.out, "Write the reconstruction as CSV");

  auto* ev = app.add_subcommand("evaluate", "Sweep SNR and n_discard over a test set");
  ev->add_option("--bundle", a.bundle, "Model bundle")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", a.data, "Test CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--snr", a.snr, "SNR grid in dB (default: config grid)")->delimiter(',');
  ev->add_option("--discard", a.discard, "n_discard values (default: config)")->delimiter(',');
  ev->add_flag("--noiseless", a.noiseless, "Evaluate a noiseless channel only");
  ev->add_option("--threads", a.threads, "Worker threads (0: all cores)");
  add_seed(ev);
  ev->add_option("--out", a.out, "Report CSV");

  auto* inspect = app.add_subcommand("inspect-bundle", "Print a bundle summary");
  inspect->add_option("--bundle", a.bundle, "Model bundle")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_synthetic(a);
    if (*train) return cmd_train(a);
    if (*tx) return cmd_transmit(a);
    if (*ev) return cmd_evaluate(a);
    if (*inspect) return cmd_inspect(a);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", errc_name(e.code()), e.what());
    return e.code() == Errc::divergence ? 3 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
