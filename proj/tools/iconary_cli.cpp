#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "iconary/alignment.hpp"
#include "iconary/baseline.hpp"
#include "iconary/metrics.hpp"
#include "iconary/report.hpp"
#include "iconary/schema.hpp"
#include "iconary/server/ingest.hpp"
#include "iconary/server/net.hpp"
#include "iconary/state_encoder.hpp"
#include "iconary/synth.hpp"

namespace fs = std::filesystem;
using namespace iconary;
using nlohmann::json;

#ifndef ICONARY_SHARE_DIR
#define ICONARY_SHARE_DIR "data"
#endif

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

fs::path share_dir() { return env_or("ICONARY_SHARE_DIR", ICONARY_SHARE_DIR); }

// --data falls back to ICONARY_DATASET, then to the bundled synthetic corpus.
struct DataArgs {
  std::string data;
  std::string icons;
  bool released = false;

  void add(CLI::App* app) {
    app->add_option("--data", data, "dataset file or directory (default: $ICONARY_DATASET or the bundled corpus)");
    app->add_option("--icons", icons, "icon library manifest");
    app->add_flag("--released-layout", released, "convert records from the released dataset layout");
  }

  fs::path data_path() const {
    if (!data.empty()) return data;
    return env_or("ICONARY_DATASET", (share_dir() / "synthetic50.jsonl").string());
  }

  IconLibrary library() const {
    return IconLibrary::load_manifest(icons.empty() ? (share_dir() / "icons.json").string() : icons);
  }

  server::IngestResult load() const {
    server::IngestOptions opts;
    opts.released_layout = released;
    return server::ingest_dataset(data_path(), opts);
  }
};

std::optional<Split> split_alias(const std::string& s) {
  static const std::map<std::string, Split> aliases{
      {"train", Split::train},         {"ind-dev", Split::ind_valid},  {"ind-valid", Split::ind_valid},
      {"ind_valid", Split::ind_valid}, {"ind-test", Split::ind_test},  {"ind_test", Split::ind_test},
      {"ood-dev", Split::ood_valid},   {"ood-valid", Split::ood_valid}, {"ood_valid", Split::ood_valid},
      {"ood-test", Split::ood_test},   {"ood_test", Split::ood_test},
  };
  auto it = aliases.find(s);
  if (it == aliases.end()) return std::nullopt;
  return it->second;
}

std::vector<GameRecord> filter_split(const std::vector<GameRecord>& corpus, Split s) {
  std::vector<GameRecord> out;
  for (const auto& r : corpus) {
    if (r.split == s) out.push_back(r);
  }
  return out;
}

std::shared_ptr<const agents::AlignmentModel> load_or_train(const std::string& path,
                                                           const std::vector<GameRecord>& train, std::uint64_t seed) {
  if (!path.empty()) return std::make_shared<agents::AlignmentModel>(agents::AlignmentModel::load(path));
  agents::AlignmentOptions opts;
  opts.seed = seed;
  return std::make_shared<agents::AlignmentModel>(agents::train_alignment(train, opts));
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

void write_report(const metrics::MetricsReport& r, const std::string& out_dir) {
  std::cout << report::metrics_table(r);
  if (out_dir.empty()) return;
  const fs::path dir = out_dir;
  write_file(dir / (r.name + ".json"), report::to_json(r).dump(2) + "\n");
  write_file(dir / (r.name + ".csv"), report::metrics_csv(r));
  std::cout << "wrote " << (dir / (r.name + ".json")).string() << "\n";
}

volatile std::sig_atomic_t* stop_flag() {
  static volatile std::sig_atomic_t flag = 0;
  return &flag;
}

int int_env(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  return std::stoi(v);
}

std::string transcript(const GameRecord& r, const IconLibrary* library) {
  std::string out = fmt::format("game {}  [{}]  phrase: \"{}\"\n", r.game_id, to_string(r.split), r.phrase.text());
  Phrase progress = r.phrase.reset();
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    const Round& round = r.rounds[i];
    std::string desc;
    if (library) {
      try {
        desc = encoder::describe_drawing(round.drawing, *library);
      } catch (const std::exception&) {
      }
    }
    if (desc.empty()) desc = join_words(icon_multiset(round.drawing), ", ");
    out += fmt::format("round {}  drawer: {}\n", i + 1, desc);
    for (const Guess& g : round.guesses) {
      auto ev = evaluate_guess(progress, g);
      progress = ev.phrase;
      std::vector<std::string> marked;
      for (std::size_t k = 0; k < g.words.size(); ++k) {
        marked.push_back(ev.guess.correctness[k] ? g.words[k] : "~" + g.words[k]);
      }
      const auto masked = mask_phrase(progress);
      std::vector<std::string> slots;
      for (const auto& w : masked.words) slots.push_back(w.text.value_or("___"));
      out += fmt::format("  guess  {:<40} -> {}\n", join_words(marked), join_words(slots));
    }
  }
  const auto o = game_outcome(r);
  out += fmt::format("outcome: {}  ({:.0f} s, {} content words missed)\n", to_string(r.outcome), r.elapsed_seconds,
                     o.missed_words);
  return out;
}

std::vector<metrics::CutoffPoint> curve_from_json(const json& j) {
  std::vector<metrics::CutoffPoint> pts;
  for (const auto& c : j.at("curve")) {
    metrics::CutoffPoint p;
    p.cutoff = c.at("cutoff").get<std::size_t>();
    if (!c.at("win").is_null()) p.win = c.at("win").get<double>();
    if (!c.at("soft_win").is_null()) p.soft_win = c.at("soft_win").get<double>();
    if (c.contains("games")) p.games = c.at("games").get<std::size_t>();
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iconary game engine, evaluation and server"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "random seed")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the game server");
  DataArgs serve_data;
  serve_data.add(serve);
  int port = int_env("ICONARY_PORT", 7878);
  int http_port = int_env("ICONARY_HTTP_PORT", 7879);
  std::string host = "127.0.0.1", store_dir = env_or("ICONARY_DATA_DIR", ""), drawer_kind = "human",
              guesser_kind = "human", serve_align, phrases_file;
  double close_threshold = server::kDefaultCloseThreshold;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "game port (env ICONARY_PORT)")->capture_default_str();
  serve->add_option("--http-port", http_port, "HTTP port, -1 disables (env ICONARY_HTTP_PORT)")->capture_default_str();
  serve->add_option("--store", store_dir, "finished-game directory (env ICONARY_DATA_DIR)");
  serve->add_option("--drawer", drawer_kind)->check(CLI::IsMember({"human", "baseline"}))->capture_default_str();
  serve->add_option("--guesser", guesser_kind)->check(CLI::IsMember({"human", "baseline"}))->capture_default_str();
  serve->add_option("--align", serve_align, "alignment model (trained from the train split when absent)");
  serve->add_option("--phrases", phrases_file, "phrase pool, one per line (default: train-split phrases)");
  serve->add_option("--close-threshold", close_threshold)->capture_default_str();

  // eval-guesser / eval-drawer
  auto* eval_g = app.add_subcommand("eval-guesser", "replay evaluation of a guesser");
  auto* eval_d = app.add_subcommand("eval-drawer", "icon F1 and perplexity of a drawer");
  DataArgs eval_data;
  std::string agent = "baseline", corpus_name = "ood-dev", eval_align, out_dir;
  std::size_t threads = 1;
  for (auto* sub : {eval_g, eval_d}) {
    eval_data.add(sub);
    sub->add_option("--agent", agent)->check(CLI::IsMember({"baseline"}))->capture_default_str();
    sub->add_option("--corpus", corpus_name, "split to evaluate on")->capture_default_str();
    sub->add_option("--align", eval_align, "alignment model (trained from the train split when absent)");
    sub->add_option("--out", out_dir, "directory for JSON and CSV reports");
    sub->add_option("--threads", threads)->capture_default_str();
  }

  // stats
  auto* stats = app.add_subcommand("stats", "dataset statistics");
  DataArgs stats_data;
  stats_data.add(stats);
  std::string stats_split, stats_json, stats_csv;
  stats->add_option("--split", stats_split, "only this split");
  stats->add_option("--json", stats_json, "write statistics as JSON");
  stats->add_option("--csv", stats_csv, "write statistics as CSV");

  // replay
  auto* replay = app.add_subcommand("replay", "print a recorded game turn by turn");
  DataArgs replay_data;
  replay_data.add(replay);
  std::string game_id;
  std::size_t game_index = 0;
  replay->add_option("--game", game_id, "game id");
  replay->add_option("--index", game_index, "position in the corpus when --game is not given");

  // align
  auto* align = app.add_subcommand("align", "train an icon/word alignment model");
  DataArgs align_data;
  align_data.add(align);
  std::string align_out = "model.align";
  agents::AlignmentOptions align_opts;
  align->add_option("--out", align_out)->capture_default_str();
  align->add_option("--dim", align_opts.dim)->capture_default_str();
  align->add_option("--epochs", align_opts.epochs)->capture_default_str();
  align->add_option("--negatives", align_opts.negatives_per_positive)->capture_default_str();
  align->add_option("--lr", align_opts.learning_rate)->capture_default_str();
  align->add_option("--margin", align_opts.margin)->capture_default_str();

  // augment
  auto* augment = app.add_subcommand("augment", "write an augmented copy of a corpus");
  DataArgs aug_data;
  aug_data.add(augment);
  std::string aug_align, aug_out = "augmented.jsonl";
  augment->add_option("--align", aug_align, "alignment model")->required();
  augment->add_option("--out", aug_out)->capture_default_str();

  // export-plots
  auto* plots = app.add_subcommand("export-plots", "render win-vs-cutoff curves from report JSON files");
  std::vector<std::string> plot_inputs;
  std::string plot_dir = ".";
  plots->add_option("reports", plot_inputs, "MetricsReport JSON files")->required();
  plots->add_option("--out", plot_dir)->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and its icon library");
  synth::CorpusOptions synth_opts;
  std::string synth_out = "synthetic.jsonl", synth_icons;
  std::uint64_t world_seed = 7;
  synth->add_option("--games", synth_opts.games)->capture_default_str();
  synth->add_option("--world-seed", world_seed)->capture_default_str();
  synth->add_option("--out", synth_out)->capture_default_str();
  synth->add_option("--icons-out", synth_icons, "also write the icon manifest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto ingested = serve_data.load();
      auto train = filter_split(ingested.corpus, Split::train);
      auto ctx = std::make_shared<server::SessionContext>();
      ctx->library = serve_data.library();
      ctx->close_threshold = close_threshold;
      const bool need_model = drawer_kind == "baseline" || guesser_kind == "baseline" || !serve_align.empty();
      if (need_model) ctx->alignment = load_or_train(serve_align, train, seed);

      server::ServerConfig cfg;
      cfg.host = host;
      cfg.port = port;
      cfg.http_port = http_port;
      if (!store_dir.empty()) cfg.data_dir = store_dir;
      cfg.seed = seed;
      if (!phrases_file.empty()) {
        std::ifstream in(phrases_file);
        for (std::string line; std::getline(in, line);) {
          if (!split_words(line).empty()) cfg.phrases.push_back(line);
        }
      } else {
        std::set<std::string> seen;
        for (const auto& r : train.empty() ? ingested.corpus : train) {
          if (seen.insert(r.phrase.text()).second) cfg.phrases.push_back(r.phrase.text());
        }
      }
      if (drawer_kind == "baseline") cfg.ai_drawer = std::make_shared<agents::BaselineDrawer>(ctx->alignment, ctx->library);
      if (guesser_kind == "baseline") {
        cfg.ai_guesser = std::make_shared<agents::BaselineGuesser>(ctx->alignment, ctx->library,
                                                                   agents::word_log_prior(train));
      }
      cfg.context = ctx;

      server::GameServer srv(std::move(cfg));
      srv.start();
      std::cout << fmt::format("listening on {}:{} (http {})", host, srv.port(), srv.http_port()) << std::endl;
      std::signal(SIGINT, [](int) { *stop_flag() = 1; });
      std::signal(SIGTERM, [](int) { *stop_flag() = 1; });
      while (!*stop_flag()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      srv.stop();
      return 0;
    }

    if (*eval_g || *eval_d) {
      auto split = split_alias(corpus_name);
      if (!split) throw CLI::ValidationError("--corpus", "unknown split " + corpus_name);
      auto ingested = eval_data.load();
      const auto library = eval_data.library();
      auto train = filter_split(ingested.corpus, Split::train);
      auto corpus = filter_split(ingested.corpus, *split);
      if (corpus.empty()) throw std::runtime_error("no games in split " + corpus_name);
      auto model = load_or_train(eval_align, train, seed);

      metrics::EvalConfig cfg;
      cfg.ood_mode = is_ood(*split);
      cfg.threads = threads;
      if (*eval_g) {
        agents::BaselineGuesser guesser(model, library, agents::word_log_prior(train));
        auto r = metrics::replay_eval_guesser(guesser, corpus, cfg);
        r.name = "guesser-" + agent + "-" + corpus_name;
        write_report(r, out_dir);
      } else {
        agents::BaselineDrawer drawer(model, library);
        codec::DrawingVocab vocab(library);
        agents::AlignmentLikelihood oracle(model, vocab);
        auto r = metrics::eval_drawer(drawer, &oracle, corpus, library, cfg);
        r.name = "drawer-" + agent + "-" + corpus_name;
        write_report(r, out_dir);
      }
      return 0;
    }

    if (*stats) {
      auto ingested = stats_data.load();
      auto corpus = ingested.corpus;
      if (!stats_split.empty()) {
        auto split = split_alias(stats_split);
        if (!split) throw CLI::ValidationError("--split", "unknown split " + stats_split);
        corpus = filter_split(corpus, *split);
      }
      auto s = metrics::dataset_stats(corpus);
      std::cout << report::dataset_table(s);
      if (!ingested.report.violations.empty() || !ingested.report.unparseable_files.empty()) {
        std::cerr << ingested.report.summary();
      }
      if (!stats_json.empty()) write_file(stats_json, report::to_json(s).dump(2) + "\n");
      if (!stats_csv.empty()) write_file(stats_csv, report::dataset_csv(s));
      return 0;
    }

    if (*replay) {
      auto ingested = replay_data.load();
      std::optional<IconLibrary> library;
      try {
        library = replay_data.library();
      } catch (const std::exception&) {
      }
      const GameRecord* rec = nullptr;
      if (!game_id.empty()) {
        for (const auto& r : ingested.corpus) {
          if (r.game_id == game_id) rec = &r;
        }
        if (!rec) throw std::runtime_error("no game " + game_id);
      } else {
        if (game_index >= ingested.corpus.size()) throw std::runtime_error("index out of range");
        rec = &ingested.corpus[game_index];
      }
      std::cout << transcript(*rec, library ? &*library : nullptr);
      return 0;
    }

    if (*align) {
      auto ingested = align_data.load();
      auto train = filter_split(ingested.corpus, Split::train);
      if (train.empty()) train = ingested.corpus;
      align_opts.seed = seed;
      agents::TrainingLog log;
      auto model = agents::train_alignment(train, align_opts, &log);
      model.save(align_out);
      std::cout << fmt::format("{} words, {} icons, final loss {:.4f}; wrote {}\n", model.words().size(),
                               model.icons().size(), log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back(),
                               align_out);
      return 0;
    }

    if (*augment) {
      auto ingested = aug_data.load();
      auto model = agents::AlignmentModel::load(aug_align);
      std::mt19937_64 rng(seed);
      std::vector<GameRecord> out;
      std::size_t changed = 0;
      for (const auto& r : ingested.corpus) {
        auto res = agents::augment(r, agents::align_game(model, r), rng);
        changed += res.augmented;
        out.push_back(std::move(res.record));
      }
      server::write_jsonl(aug_out, out);
      std::cout << fmt::format("augmented {} of {} games; wrote {}\n", changed, out.size(), aug_out);
      return 0;
    }

    if (*plots) {
      for (const auto& in : plot_inputs) {
        std::ifstream f(in);
        if (!f) throw std::runtime_error("cannot read " + in);
        const json j = json::parse(f);
        const std::string name = j.value("name", fs::path(in).stem().string());
        const std::string unit = j.value("curve_unit", "guesses");
        const fs::path out = fs::path(plot_dir) / (name + ".svg");
        write_file(out, report::curve_svg(name, unit, curve_from_json(j)));
        std::cout << "wrote " << out.string() << "\n";
      }
      return 0;
    }

    if (*synth) {
      synth_opts.seed = seed;
      const auto world = synth::make_world(world_seed);
      server::write_jsonl(synth_out, synth::make_corpus(world, synth_opts));
      if (!synth_icons.empty()) write_file(synth_icons, world.library.to_manifest_text());
      std::cout << fmt::format("wrote {} games to {}\n", synth_opts.games, synth_out);
      return 0;
    }
  } catch (const server::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.report().summary();
    return 1;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
