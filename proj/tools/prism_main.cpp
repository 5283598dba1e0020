#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prism/config.hpp"
#include "prism/datagen.hpp"
#include "prism/eval.hpp"
#include "prism/features.hpp"
#include "prism/judge.hpp"
#include "prism/train.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option_function<std::string>(
         "--config",
         [&args](const std::string& v) { args.config_path = v; },
         "JSON config file merged over the defaults");
  cmd->add_option("--set", args.sets,
                  "override one key, as section.key=value (repeatable)");
  cmd->add_option("--out", args.out_dir, "output directory")->required();
}

prism::RunConfig load_run_config(const CommonArgs& args) {
  auto doc = prism::effective_config(args.config_path, args.sets);
  return prism::parse_run_config(doc);
}

void write_text(const fs::path& path, const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw prism::IoError("cannot open '" + path.string() + "' for writing");
  out << payload;
  if (!out)
    throw prism::IoError("failed while writing '" + path.string() + "'");
}

void write_echo(const prism::RunConfig& cfg, const fs::path& path) {
  write_text(path, cfg.effective.dump(2) + "\n");
}

fs::path ensure_out_dir(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw prism::IoError("cannot create output directory '" + dir +
                         "': " + ec.message());
  return out;
}

// ---- feature tables -------------------------------------------------------

struct FeatureRow {
  std::string id;
  std::vector<double> chosen;
  std::vector<double> rejected;
};

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<FeatureRow> rows;
};

void write_feature_rows(const std::vector<FeatureRow>& rows,
                        const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw prism::IoError("cannot open '" + path.string() + "' for writing");
  for (const FeatureRow& r : rows) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["chosen_features"] = r.chosen;
    j["rejected_features"] = r.rejected;
    out << j.dump() << '\n';
  }
  if (!out)
    throw prism::IoError("failed while writing '" + path.string() + "'");
}

std::vector<FeatureRow> read_feature_rows(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw prism::IoError("cannot open '" + path.string() + "' for reading");
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw prism::ParseError(path.string() + " line " +
                              std::to_string(line_no) + ": " + e.what());
    }
    FeatureRow row;
    try {
      row.id = j.at("id").get<std::string>();
      row.chosen = j.at("chosen_features").get<std::vector<double>>();
      row.rejected = j.at("rejected_features").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw prism::ParseError(path.string() + " line " +
                              std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_standardizer(const prism::Standardizer& st,
                        const std::vector<std::string>& names,
                        const fs::path& path) {
  nlohmann::ordered_json j;
  j["names"] = names;
  j["mean"] = st.mean;
  j["stddev"] = st.stddev;
  write_text(path, j.dump(2) + "\n");
}

std::pair<prism::Standardizer, std::vector<std::string>> read_standardizer(
    const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw prism::IoError("cannot open '" + path.string() + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    prism::Standardizer st;
    st.mean = j.at("mean").get<std::vector<double>>();
    st.stddev = j.at("stddev").get<std::vector<double>>();
    auto names = j.at("names").get<std::vector<std::string>>();
    if (st.mean.size() != st.stddev.size() || st.mean.size() != names.size())
      throw prism::ParseError(path.string() +
                              ": names, mean, and stddev sizes disagree");
    return {std::move(st), std::move(names)};
  } catch (const nlohmann::json::exception& e) {
    throw prism::ParseError(path.string() + ": " + e.what());
  }
}

// split -> file naming shared by gen-data, extract-features, train, and eval
const std::vector<std::pair<std::string, std::string>> kSplitFiles{
    {"train", "train.jsonl"},
    {"id_test", "id_test.jsonl"},
    {"ood_test", "ood_test.jsonl"},
};

std::string features_file_name(const std::string& split) {
  return "features_" + split + ".jsonl";
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_data(const CommonArgs& args) {
  prism::RunConfig cfg = load_run_config(args);
  fs::path out = ensure_out_dir(args.out_dir);
  prism::Dataset data = prism::gen_dataset(cfg.data);
  prism::write_jsonl(data.train, (out / "train.jsonl").string());
  prism::write_jsonl(data.id_test, (out / "id_test.jsonl").string());
  prism::write_jsonl(data.ood_test, (out / "ood_test.jsonl").string());
  write_echo(cfg, out / "spec.json");
  std::cout << "wrote " << data.train.size() << "/" << data.id_test.size()
            << "/" << data.ood_test.size()
            << " triples (train/id_test/ood_test) to " << out.string() << "\n";
  return 0;
}

int cmd_extract_features(const CommonArgs& args, const std::string& data_dir) {
  prism::RunConfig cfg = load_run_config(args);
  fs::path out = ensure_out_dir(args.out_dir);
  fs::path data(data_dir);

  std::optional<prism::JudgeClient> judge;
  std::optional<prism::FeatureExtractor> extractor;
  std::vector<std::string> names;
  if (cfg.data.mode == prism::DataMode::text) {
    names = cfg.features.features;
    prism::FeatureExtractor::JudgeFn judge_fn;
    if (cfg.features.use_judge) {
      judge.emplace(cfg.judge, prism::Lexicon::builtin());
      judge_fn = [&judge](const std::string& attribute,
                          const std::string& prompt,
                          const std::string& response) {
        return judge->score({attribute, prompt, response});
      };
    }
    extractor.emplace(cfg.features, prism::Lexicon::builtin(),
                      std::move(judge_fn));
  } else {
    for (std::size_t c = 0; c < cfg.data.d_s; ++c)
      names.push_back("channel" + std::to_string(c));
  }

  std::vector<std::vector<double>> train_pool;
  for (const auto& [split, file] : kSplitFiles) {
    prism::Split triples = prism::read_jsonl((data / file).string());
    std::vector<FeatureRow> rows;
    rows.reserve(triples.size());
    for (const auto& t : triples) {
      FeatureRow row;
      row.id = t.id;
      if (cfg.data.mode == prism::DataMode::text) {
        if (!t.chosen.text || !t.rejected.text)
          throw prism::DataError(
              "triple '" + t.id +
              "' has no response text; text features need text-mode data");
        row.chosen = extractor->extract_all(t.prompt, *t.chosen.text);
        row.rejected = extractor->extract_all(t.prompt, *t.rejected.text);
      } else {
        if (t.chosen.shortcuts.size() != cfg.data.d_s ||
            t.rejected.shortcuts.size() != cfg.data.d_s)
          throw prism::DataError("triple '" + t.id + "' carries " +
                                 std::to_string(t.chosen.shortcuts.size()) +
                                 " shortcut channels, config says " +
                                 std::to_string(cfg.data.d_s));
        row.chosen = t.chosen.shortcuts;
        row.rejected = t.rejected.shortcuts;
      }
      if (split == "train") {
        train_pool.push_back(row.chosen);
        train_pool.push_back(row.rejected);
      }
      rows.push_back(std::move(row));
    }
    write_feature_rows(rows, out / features_file_name(split));
  }

  prism::Standardizer st = prism::Standardizer::fit(train_pool);
  write_standardizer(st, names, out / "standardizer.json");
  write_echo(cfg, out / "config.json");
  if (judge)
    std::cout << "judge cache hits: " << judge->cache_hits()
              << ", network calls: " << judge->network_calls() << "\n";
  std::cout << "wrote feature tables for " << kSplitFiles.size()
            << " splits to " << out.string() << "\n";
  return 0;
}

struct JoinedSplit {
  std::vector<std::vector<double>> input_w, input_l;   // embedding + std feats
  std::vector<std::vector<double>> raw_w, raw_l;       // raw feature values
  std::vector<std::vector<double>> std_w, std_l;       // standardized values
};

JoinedSplit join_split(const prism::Split& triples,
                       const std::vector<FeatureRow>& rows,
                       const prism::Standardizer& st) {
  if (triples.size() != rows.size())
    throw prism::DataError("data has " + std::to_string(triples.size()) +
                           " triples but features file has " +
                           std::to_string(rows.size()) + " rows");
  JoinedSplit out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (triples[i].id != rows[i].id)
      throw prism::DataError("row " + std::to_string(i) + ": data id '" +
                             triples[i].id + "' does not match features id '" +
                             rows[i].id + "'");
    std::vector<double> sw = st.transform(rows[i].chosen);
    std::vector<double> sl = st.transform(rows[i].rejected);
    std::vector<double> xw = triples[i].chosen.embedding;
    xw.insert(xw.end(), sw.begin(), sw.end());
    std::vector<double> xl = triples[i].rejected.embedding;
    xl.insert(xl.end(), sl.begin(), sl.end());
    out.input_w.push_back(std::move(xw));
    out.input_l.push_back(std::move(xl));
    out.raw_w.push_back(rows[i].chosen);
    out.raw_l.push_back(rows[i].rejected);
    out.std_w.push_back(std::move(sw));
    out.std_l.push_back(std::move(sl));
  }
  return out;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir,
              const std::string& features_dir) {
  prism::RunConfig cfg = load_run_config(args);
  fs::path out = ensure_out_dir(args.out_dir);
  fs::path data(data_dir);
  fs::path feats(features_dir);

  fs::path st_path = feats / "standardizer.json";
  if (!fs::exists(st_path))
    throw prism::IoError("standardizer file '" + st_path.string() +
                         "' not found; run extract-features on this data first");
  auto [st, names] = read_standardizer(st_path);

  prism::Split triples = prism::read_jsonl((data / "train.jsonl").string());
  std::vector<FeatureRow> rows =
      read_feature_rows(feats / features_file_name("train"));
  JoinedSplit joined = join_split(triples, rows, st);

  prism::TrainingSet set;
  set.input_w = std::move(joined.input_w);
  set.input_l = std::move(joined.input_l);
  set.feat_w = std::move(joined.std_w);
  set.feat_l = std::move(joined.std_l);

  prism::TrainResult result = prism::train(set, cfg.train);

  prism::Checkpoint chk;
  chk.params = result.params;
  if (cfg.train.mode == prism::TrainMode::prism) chk.mix = result.mix;
  chk.standardizer = st;
  chk.shortcut_names = names;
  chk.config_echo = cfg.effective;
  prism::save_checkpoint(chk, (out / "checkpoint.json").string());

  std::string csv = "step,lr,lambda1,lambda2,bt_term,kinv_mean,rglobal,total_loss\n";
  for (const prism::HistoryRow& row : result.history) {
    csv += std::to_string(row.step) + ',' + prism::format6(row.lr) + ',' +
           prism::format6(row.lambda1) + ',' + prism::format6(row.lambda2) +
           ',' + prism::format6(row.bt_term) + ',' +
           prism::format6(row.kinv_mean) + ',' + prism::format6(row.rglobal) +
           ',' + prism::format6(row.total_loss) + '\n';
  }
  write_text(out / "history.csv", csv);
  write_echo(cfg, out / "config.json");
  std::cout << "trained " << cfg.train.total_steps << " steps; final loss "
            << prism::format6(result.history.back().total_loss) << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& data_dir, const std::string& features_dir) {
  prism::RunConfig cfg = load_run_config(args);
  if (features_dir.empty())
    throw prism::ConfigError(
        "eval needs --features pointing at extract-features output; run "
        "extract-features first");
  fs::path out = ensure_out_dir(args.out_dir);
  fs::path data(data_dir);
  fs::path feats(features_dir);

  prism::Checkpoint chk = prism::load_checkpoint(checkpoint_path);

  prism::EvalReport report;
  report.config_echo = cfg.effective;
  for (const auto& [split, file] : kSplitFiles) {
    if (split == "train") continue;
    fs::path feat_path = feats / features_file_name(split);
    if (!fs::exists(feat_path))
      throw prism::IoError("features file '" + feat_path.string() +
                           "' not found; run extract-features on this data "
                           "first");
    prism::Split triples = prism::read_jsonl((data / file).string());
    std::vector<FeatureRow> rows = read_feature_rows(feat_path);
    JoinedSplit joined = join_split(triples, rows, chk.standardizer);
    if (!joined.input_w.empty() &&
        joined.input_w.front().size() != chk.params.input_dim)
      throw prism::DataError(
          "checkpoint expects input dimension " +
          std::to_string(chk.params.input_dim) + " but split '" + split +
          "' provides " + std::to_string(joined.input_w.front().size()));

    prism::SplitReport sr;
    sr.split = split;
    sr.n = joined.input_w.size();
    sr.accuracy = prism::accuracy(chk.params, joined.input_w, joined.input_l);

    std::vector<double> rewards =
        prism::pooled_rewards(chk.params, joined.input_w, joined.input_l);
    std::size_t n_feats = chk.shortcut_names.size();
    std::vector<std::vector<double>> columns(n_feats);
    for (std::size_t j = 0; j < n_feats; ++j) {
      columns[j].reserve(2 * joined.raw_w.size());
      for (const auto& row : joined.raw_w) columns[j].push_back(row[j]);
      for (const auto& row : joined.raw_l) columns[j].push_back(row[j]);
    }
    prism::CorrelationReport corr = prism::correlation_analysis(
        rewards, columns, chk.shortcut_names, cfg.n_permutations,
        cfg.permutation_seed);
    sr.shortcut_names = corr.names;
    sr.pcc = corr.pcc;
    sr.p_values = corr.p_values;
    report.splits.push_back(std::move(sr));
  }

  prism::emit_report(report, (out / "report.json").string(), "json");
  prism::emit_report(report, (out / "report.csv").string(), "csv");
  write_echo(cfg, out / "config.json");
  for (const auto& sr : report.splits)
    std::cout << sr.split << " accuracy " << prism::format6(sr.accuracy)
              << "\n";
  return 0;
}

int cmd_kernel_bench(const CommonArgs& args) {
  prism::RunConfig cfg = load_run_config(args);
  fs::path out = ensure_out_dir(args.out_dir);
  std::vector<prism::KernelBenchRow> rows =
      prism::kernel_convergence_bench(cfg.bench);
  prism::write_bench_csv(rows, (out / "bench.csv").string());
  write_echo(cfg, out / "config.json");
  std::cout << "wrote " << rows.size() << " benchmark rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-invariant preference reward pipelines"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate synthetic splits");
  add_common(gen, gen_args);

  CommonArgs ext_args;
  std::string ext_data;
  CLI::App* ext = app.add_subcommand("extract-features",
                                     "extract per-response feature tables");
  add_common(ext, ext_args);
  ext->add_option("--data", ext_data, "directory holding the jsonl splits")
      ->required();

  CommonArgs train_args;
  std::string train_data, train_feats;
  CLI::App* tr = app.add_subcommand("train", "train a reward model");
  add_common(tr, train_args);
  tr->add_option("--data", train_data, "directory holding the jsonl splits")
      ->required();
  tr->add_option("--features", train_feats,
                 "directory holding extracted feature tables")
      ->required();

  CommonArgs eval_args;
  std::string eval_chk, eval_data, eval_feats;
  CLI::App* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
  add_common(ev, eval_args);
  ev->add_option("--checkpoint", eval_chk, "checkpoint json file")->required();
  ev->add_option("--data", eval_data, "directory holding the jsonl splits")
      ->required();
  ev->add_option("--features", eval_feats,
                 "directory holding extracted feature tables");

  CommonArgs bench_args;
  CLI::App* kb = app.add_subcommand("kernel-bench",
                                    "feature-map convergence benchmark");
  add_common(kb, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (ext->parsed()) return cmd_extract_features(ext_args, ext_data);
    if (tr->parsed()) return cmd_train(train_args, train_data, train_feats);
    if (ev->parsed()) return cmd_eval(eval_args, eval_chk, eval_data, eval_feats);
    if (kb->parsed()) return cmd_kernel_bench(bench_args);
  } catch (const prism::JudgeError& e) {
    std::cerr << "judge error: " << e.what() << "\n";
    return 3;
  } catch (const prism::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
