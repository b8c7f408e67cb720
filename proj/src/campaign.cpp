#include "pevade/harness/campaign.hpp"

#include <atomic>
#include <cstdio>
#include <json.hpp>
#include <thread>

#include "pevade/attack/blackbox.hpp"
#include "pevade/error.hpp"
#include "pevade/harness/corpus.hpp"
#include "pevade/model/model_io.hpp"

namespace pevade {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) { known = true; break; }
    }
    if (!known) {
      raise(Errc::config_error, "unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

std::vector<std::uint64_t> checkpoint_list(const json& j,
                                           const std::string& where) {
  std::vector<std::uint64_t> out;
  for (const auto& v : j) out.push_back(v.get<std::uint64_t>());
  if (out.empty()) raise(Errc::config_error, where + " must be non-empty");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] <= out[i - 1]) {
      raise(Errc::config_error, where + " must be strictly increasing");
    }
  }
  return out;
}

AttackSpec parse_attack(const json& j) {
  check_keys(j, {"name", "engine", "amount", "pad_len"}, "attack entry");
  AttackSpec a;
  a.name = j.at("name").get<std::string>();
  a.engine = j.value("engine", std::string("whitebox"));
  if (a.engine != "whitebox" && a.engine != "blackbox" && a.engine != "gamma") {
    raise(Errc::config_error, "unknown engine \"" + a.engine + "\"");
  }
  if (a.engine == "gamma") {
    if (a.name != "gamma_padding" && a.name != "gamma_section") {
      raise(Errc::config_error,
            "gamma engine expects gamma_padding or gamma_section");
    }
    return a;
  }
  a.manip.kind = manip_from_name(a.name);
  a.manip.amount = j.value("amount", 0u);
  a.manip.pad_len = j.value("pad_len", std::size_t{0});
  if ((a.manip.kind == ManipKind::extend || a.manip.kind == ManipKind::shift) &&
      a.manip.amount == 0) {
    raise(Errc::config_error, a.name + " needs a nonzero \"amount\"");
  }
  if ((a.manip.kind == ManipKind::padding ||
       a.manip.kind == ManipKind::slack_padding) &&
      a.manip.pad_len == 0) {
    raise(Errc::config_error, a.name + " needs a nonzero \"pad_len\"");
  }
  return a;
}

double rate_percent_1dp(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  return std::stod(buf);
}

}  // namespace

CampaignConfig parse_campaign_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"version", "seed", "threshold", "jobs", "dataset", "model",
              "attacks", "checkpoints", "whitebox", "genetic", "gamma"},
             "campaign config");
  CampaignConfig cfg;
  try {
    cfg.version = j.at("version").get<int>();
    if (cfg.version != 1) {
      raise(Errc::config_error,
            "unsupported config version " + std::to_string(cfg.version));
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.threshold = j.value("threshold", 0.5);
    cfg.jobs = j.value("jobs", 1);

    const auto& ds = j.at("dataset");
    check_keys(ds, {"manifest"}, "dataset");
    cfg.manifest = base_dir / ds.at("manifest").get<std::string>();

    const auto& m = j.at("model");
    check_keys(m, {"type", "path", "seed", "cnn", "gbdt"}, "model");
    cfg.model.type = m.value("type", std::string("byte-cnn"));
    if (cfg.model.type != "byte-cnn" && cfg.model.type != "gbdt") {
      raise(Errc::config_error, "unknown model type \"" + cfg.model.type + "\"");
    }
    if (m.contains("path")) {
      cfg.model.path = base_dir / m.at("path").get<std::string>();
    }
    cfg.model.seed = m.value("seed", std::uint64_t{0});
    if (m.contains("cnn")) {
      const auto& c = m.at("cnn");
      check_keys(c,
                 {"embedding_dim", "kernel_width", "channels", "max_input_len",
                  "stride", "epochs", "batch_size", "learning_rate"},
                 "model.cnn");
      auto& hp = cfg.model.cnn;
      hp.embedding_dim = c.value("embedding_dim", hp.embedding_dim);
      hp.kernel_width = c.value("kernel_width", hp.kernel_width);
      hp.channels = c.value("channels", hp.channels);
      hp.max_input_len = c.value("max_input_len", hp.max_input_len);
      hp.stride = c.value("stride", hp.stride);
      hp.epochs = c.value("epochs", hp.epochs);
      hp.batch_size = c.value("batch_size", hp.batch_size);
      hp.learning_rate = c.value("learning_rate", hp.learning_rate);
    }
    if (m.contains("gbdt")) {
      const auto& g = m.at("gbdt");
      check_keys(g, {"num_trees", "max_depth", "learning_rate",
                     "min_samples_leaf"},
                 "model.gbdt");
      auto& hp = cfg.model.gbdt;
      hp.num_trees = g.value("num_trees", hp.num_trees);
      hp.max_depth = g.value("max_depth", hp.max_depth);
      hp.learning_rate = g.value("learning_rate", hp.learning_rate);
      hp.min_samples_leaf = g.value("min_samples_leaf", hp.min_samples_leaf);
    }

    // Optional for train-only configs; a campaign still needs at least one.
    if (j.contains("attacks")) {
      for (const auto& a : j.at("attacks")) {
        cfg.attacks.push_back(parse_attack(a));
      }
      if (cfg.attacks.empty()) {
        raise(Errc::config_error,
              "attack list must contain at least one attack");
      }
    }

    if (j.contains("checkpoints")) {
      const auto& c = j.at("checkpoints");
      check_keys(c, {"iterations", "queries"}, "checkpoints");
      if (c.contains("iterations")) {
        cfg.iteration_checkpoints =
            checkpoint_list(c.at("iterations"), "checkpoints.iterations");
      }
      if (c.contains("queries")) {
        cfg.query_checkpoints =
            checkpoint_list(c.at("queries"), "checkpoints.queries");
      }
    }

    if (j.contains("whitebox")) {
      const auto& w = j.at("whitebox");
      check_keys(w, {"step_size", "stop_below_threshold"}, "whitebox");
      cfg.whitebox.step_size = w.value("step_size", cfg.whitebox.step_size);
      cfg.whitebox.stop_below_threshold =
          w.value("stop_below_threshold", cfg.whitebox.stop_below_threshold);
    }
    if (j.contains("genetic")) {
      const auto& g = j.at("genetic");
      check_keys(g,
                 {"population_size", "crossover_rate", "mutation_rate",
                  "mutation_sigma", "elitism_count"},
                 "genetic");
      cfg.genetic.population_size =
          g.value("population_size", cfg.genetic.population_size);
      cfg.genetic.crossover_rate =
          g.value("crossover_rate", cfg.genetic.crossover_rate);
      cfg.genetic.mutation_rate =
          g.value("mutation_rate", cfg.genetic.mutation_rate);
      cfg.genetic.mutation_sigma =
          g.value("mutation_sigma", cfg.genetic.mutation_sigma);
      cfg.genetic.elitism_count =
          g.value("elitism_count", cfg.genetic.elitism_count);
    }
    if (j.contains("gamma")) {
      const auto& g = j.at("gamma");
      check_keys(g, {"lambda", "payload_dir", "binary_inclusion"}, "gamma");
      cfg.gamma.lambda = g.value("lambda", cfg.gamma.lambda);
      if (g.contains("payload_dir")) {
        cfg.gamma.payload_dir = base_dir / g.at("payload_dir").get<std::string>();
      }
      cfg.gamma.binary_inclusion =
          g.value("binary_inclusion", cfg.gamma.binary_inclusion);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("bad config value: ") + e.what());
  }
  return cfg;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  const Bytes raw = read_file(path);
  return parse_campaign_config(std::string(raw.begin(), raw.end()),
                               path.parent_path());
}

std::unique_ptr<Classifier> resolve_model(const CampaignConfig& cfg,
                                          const std::vector<RawExe>& dataset,
                                          TrainReport* report) {
  std::unique_ptr<Classifier> model;
  if (!cfg.model.path.empty()) {
    model = load_classifier(cfg.model.path);
  } else if (cfg.model.type == "byte-cnn") {
    model = std::make_unique<ByteCnnClassifier>(
        train_cnn(dataset, cfg.model.cnn, cfg.model.seed, report));
  } else {
    model = std::make_unique<GbdtClassifier>(
        train_trees(dataset, cfg.model.gbdt, cfg.model.seed, report));
  }
  model->set_threshold(cfg.threshold);
  return model;
}

namespace {

SampleOutcome attack_one(const RawExe& sample, const AttackSpec& spec,
                         const Classifier& model, const CampaignConfig& cfg,
                         const std::vector<SectionPayload>& payloads,
                         std::uint64_t run_seed) {
  SampleOutcome out;
  out.sample_id = sample.sample_id;
  try {
    if (spec.engine == "whitebox") {
      WhiteboxConfig wcfg = cfg.whitebox;
      wcfg.max_iterations =
          static_cast<unsigned>(cfg.iteration_checkpoints.back());
      wcfg.seed = run_seed;
      out.trace = run_whitebox(sample, spec.manip, model, wcfg);
    } else if (spec.engine == "blackbox") {
      GeneticConfig gcfg = cfg.genetic;
      gcfg.max_queries = cfg.query_checkpoints.back();
      gcfg.seed = run_seed;
      out.trace = run_blackbox_bytes(sample, spec.manip, model, gcfg);
    } else {
      GeneticConfig gcfg = cfg.genetic;
      gcfg.max_queries = cfg.query_checkpoints.back();
      gcfg.seed = run_seed;
      GammaConfig gamma;
      gamma.lambda = cfg.gamma.lambda;
      gamma.binary_inclusion = cfg.gamma.binary_inclusion;
      gamma.mode = spec.name == "gamma_section" ? GammaMode::section_injection
                                                : GammaMode::padding;
      gamma.payloads = payloads;
      out.trace = run_gamma(sample, model, gamma, gcfg);
    }
  } catch (const Error& e) {
    out.applicable = false;
    out.error = e.what();
  }
  return out;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg) {
  if (cfg.attacks.empty()) {
    raise(Errc::config_error, "campaign config declares no attacks");
  }
  const std::vector<RawExe> dataset = load_dataset(cfg.manifest);
  std::vector<RawExe> malicious;
  for (const auto& s : dataset) {
    if (s.label == Label::malicious) malicious.push_back(s);
  }
  if (malicious.empty()) {
    raise(Errc::config_error, "dataset holds no malicious samples");
  }
  const auto model = resolve_model(cfg, dataset);

  bool needs_payloads = false;
  for (const auto& a : cfg.attacks) {
    if (a.engine == "gamma") needs_payloads = true;
  }
  std::vector<SectionPayload> payloads;
  if (needs_payloads) {
    if (cfg.gamma.payload_dir.empty()) {
      raise(Errc::config_error, "gamma attacks need gamma.payload_dir");
    }
    payloads = load_payloads(cfg.gamma.payload_dir);
  }

  CampaignResult result;
  result.n_malicious = static_cast<int>(malicious.size());
  int baseline_hits = 0;
  for (const auto& s : malicious) {
    if (model->detects(s.bytes)) ++baseline_hits;
  }
  result.baseline_detection_rate =
      static_cast<double>(baseline_hits) / static_cast<double>(malicious.size());

  const int jobs = std::max(1, cfg.jobs);
  for (std::size_t ai = 0; ai < cfg.attacks.size(); ++ai) {
    const AttackSpec& spec = cfg.attacks[ai];
    AttackResult ar;
    ar.spec = spec;
    ar.checkpoints = spec.engine == "whitebox" ? cfg.iteration_checkpoints
                                               : cfg.query_checkpoints;
    ar.outcomes.resize(malicious.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= malicious.size()) break;
        const std::uint64_t run_seed =
            mix_seed(cfg.seed, (static_cast<std::uint64_t>(ai) << 32) | i);
        ar.outcomes[i] =
            attack_one(malicious[i], spec, *model, cfg, payloads, run_seed);
      }
    };
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    for (const auto& o : ar.outcomes) {
      (o.applicable ? ar.n_applicable : ar.n_inapplicable)++;
    }
    for (const auto cp : ar.checkpoints) {
      int hits = 0;
      for (const auto& o : ar.outcomes) {
        if (o.applicable && o.trace.detected_at(cp)) ++hits;
      }
      ar.detection_rates.push_back(
          ar.n_applicable > 0
              ? static_cast<double>(hits) / static_cast<double>(ar.n_applicable)
              : 0.0);
    }
    result.attacks.push_back(std::move(ar));
  }
  return result;
}

void emit_report(const CampaignResult& result, ReportFormat format,
                 const std::filesystem::path& out) {
  std::string text;
  if (format == ReportFormat::csv) {
    text = "attack,engine,checkpoint,detection_rate,n_samples\n";
    char line[256];
    for (const auto& ar : result.attacks) {
      for (std::size_t i = 0; i < ar.checkpoints.size(); ++i) {
        std::snprintf(line, sizeof line, "%s,%s,%llu,%.1f,%d\n",
                      ar.spec.name.c_str(), ar.spec.engine.c_str(),
                      static_cast<unsigned long long>(ar.checkpoints[i]),
                      ar.detection_rates[i] * 100.0, ar.n_applicable);
        text += line;
      }
    }
  } else {
    json rows = json::array();
    for (const auto& ar : result.attacks) {
      for (std::size_t i = 0; i < ar.checkpoints.size(); ++i) {
        rows.push_back({{"attack", ar.spec.name},
                        {"engine", ar.spec.engine},
                        {"checkpoint", ar.checkpoints[i]},
                        {"detection_rate",
                         rate_percent_1dp(ar.detection_rates[i])},
                        {"n_samples", ar.n_applicable}});
      }
    }
    text = rows.dump(2) + "\n";
  }
  write_file(out, Bytes(text.begin(), text.end()));
}

void save_result(const CampaignResult& result,
                 const std::filesystem::path& path) {
  json j;
  j["baseline_detection_rate"] = result.baseline_detection_rate;
  j["n_malicious"] = result.n_malicious;
  json attacks = json::array();
  for (const auto& ar : result.attacks) {
    json ja;
    ja["name"] = ar.spec.name;
    ja["engine"] = ar.spec.engine;
    ja["checkpoints"] = ar.checkpoints;
    ja["detection_rates"] = ar.detection_rates;
    ja["n_applicable"] = ar.n_applicable;
    ja["n_inapplicable"] = ar.n_inapplicable;
    json samples = json::array();
    for (const auto& o : ar.outcomes) {
      json jo;
      jo["sample_id"] = o.sample_id;
      jo["applicable"] = o.applicable;
      if (!o.applicable) jo["error"] = o.error;
      jo["initial_score"] = o.trace.initial_score;
      jo["initial_detected"] = o.trace.initial_detected;
      jo["succeeded"] = o.trace.succeeded;
      json steps = json::array();
      for (const auto& st : o.trace.steps) {
        steps.push_back({st.effort, st.score, st.detected, st.injected_bytes});
      }
      jo["steps"] = std::move(steps);
      samples.push_back(std::move(jo));
    }
    ja["samples"] = std::move(samples);
    attacks.push_back(std::move(ja));
  }
  j["attacks"] = std::move(attacks);
  const std::string text = j.dump(2) + "\n";
  write_file(path, Bytes(text.begin(), text.end()));
}

CampaignResult load_result(const std::filesystem::path& path) {
  const Bytes raw = read_file(path);
  json j;
  try {
    j = json::parse(raw.begin(), raw.end());
  } catch (const std::exception& e) {
    raise(Errc::io_error, std::string("bad result file: ") + e.what());
  }
  CampaignResult result;
  try {
    result.baseline_detection_rate = j.at("baseline_detection_rate").get<double>();
    result.n_malicious = j.at("n_malicious").get<int>();
    for (const auto& ja : j.at("attacks")) {
      AttackResult ar;
      ar.spec.name = ja.at("name").get<std::string>();
      ar.spec.engine = ja.at("engine").get<std::string>();
      ar.checkpoints = ja.at("checkpoints").get<std::vector<std::uint64_t>>();
      ar.detection_rates = ja.at("detection_rates").get<std::vector<double>>();
      ar.n_applicable = ja.at("n_applicable").get<int>();
      ar.n_inapplicable = ja.at("n_inapplicable").get<int>();
      for (const auto& jo : ja.at("samples")) {
        SampleOutcome o;
        o.sample_id = jo.at("sample_id").get<std::string>();
        o.applicable = jo.at("applicable").get<bool>();
        o.error = jo.value("error", std::string());
        o.trace.initial_score = jo.at("initial_score").get<double>();
        o.trace.initial_detected = jo.at("initial_detected").get<bool>();
        o.trace.succeeded = jo.at("succeeded").get<bool>();
        for (const auto& st : jo.at("steps")) {
          o.trace.steps.push_back({st.at(0).get<std::uint64_t>(),
                                   st.at(1).get<double>(),
                                   st.at(2).get<bool>(),
                                   st.at(3).get<std::uint64_t>()});
        }
        ar.outcomes.push_back(std::move(o));
      }
      result.attacks.push_back(std::move(ar));
    }
  } catch (const std::exception& e) {
    raise(Errc::io_error, std::string("bad result file: ") + e.what());
  }
  return result;
}

}  // namespace pevade
