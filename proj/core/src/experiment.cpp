#include "alans/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "alans/dataset_io.hpp"
#include "alans/error.hpp"

namespace alans {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  }
  return x;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int x{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return x;
}

/// Wraps a name parser so domain errors surface as configuration errors.
template <typename F>
auto parse_name(std::string_view key, std::string_view v, F&& f) {
  try {
    return f(v);
  } catch (const Error& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v, "%.3f") : "-"; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

std::string mask_string(int mask) {
  std::string s;
  for (int j = 0; j < kGridSlots; ++j) {
    if (j && j % 3 == 0) s += '/';
    s += (mask >> j) & 1 ? '1' : '0';
  }
  return s;
}

std::string value_string(Attribute a, int v) {
  return a == Attribute::Position ? mask_string(v) : std::to_string(v);
}

std::string attr_name(Attribute a) { return std::string(to_string(a)); }

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  ReasonerConfig& r = c.train.reasoner;
  r.set_ridge(RelationKind::Unary, 1e-3);
  r.set_ridge(RelationKind::Binary, 1e-2);
  r.set_ridge(RelationKind::Ternary, 1e-1);
  r.tau_posterior = 0.1;
  r.tau_decode = 1.0;
  for (Attribute a : kEncodedAttributes) r.tau_candidate[index_of(a)] = 0.2;
  return c;
}

void ExperimentConfig::set_noise(double eps) { train.noise = {eps, eps}; }

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  const std::string v = trim(value);
  ReasonerConfig& r = train.reasoner;
  auto path = [&] { return std::filesystem::path(v); };

  if (k == "regime") {
    regime = parse_name(k, v, regime_from_string);
  } else if (k == "strategy") {
    strategy = parse_name(k, v, strategy_from_string);
  } else if (k == "n") {
    n = parse_int<std::size_t>(k, v);
  } else if (k == "seed") {
    train.seed = parse_int<std::uint64_t>(k, v);
  } else if (k == "variant") {
    train.variant = parse_name(k, v, model_kind_from_string);
  } else if (k == "baseline") {
    baseline = parse_name(k, v, model_kind_from_string);
  } else if (k == "noise") {
    set_noise(parse_double(k, v));
  } else if (k == "d") {
    train.d = parse_int<int>(k, v);
  } else if (k == "lr") {
    train.learning_rate = parse_double(k, v);
  } else if (k == "beta1") {
    train.beta1 = parse_double(k, v);
  } else if (k == "beta2") {
    train.beta2 = parse_double(k, v);
  } else if (k == "adam_epsilon") {
    train.adam_epsilon = parse_double(k, v);
  } else if (k == "stage1_epochs") {
    train.stage1_epochs = parse_int<int>(k, v);
  } else if (k == "stage2_epochs") {
    train.stage2_epochs = parse_int<int>(k, v);
  } else if (k == "batch_size") {
    train.batch_size = parse_int<int>(k, v);
  } else if (k == "aux_weight_stage1") {
    train.aux_weight_stage1 = parse_double(k, v);
  } else if (k == "aux_weight_stage2") {
    train.aux_weight_stage2 = parse_double(k, v);
  } else if (k == "ridge_unary") {
    r.set_ridge(RelationKind::Unary, parse_double(k, v));
  } else if (k == "ridge_binary") {
    r.set_ridge(RelationKind::Binary, parse_double(k, v));
  } else if (k == "ridge_ternary") {
    r.set_ridge(RelationKind::Ternary, parse_double(k, v));
  } else if (k.rfind("ridge.", 0) == 0) {
    const auto dot = k.find('.', 6);
    if (dot == std::string::npos) throw ConfigError(k + ": expected ridge.<attribute>.<kind>");
    const Attribute a =
        parse_name(k, std::string_view(k).substr(6, dot - 6), attribute_from_string);
    const RelationKind kind = parse_name(k, std::string_view(k).substr(dot + 1), kind_from_string);
    r.ridge[index_of(a)][static_cast<std::size_t>(kind)] = parse_double(k, v);
  } else if (k == "tau_posterior") {
    r.tau_posterior = parse_double(k, v);
  } else if (k == "tau_decode") {
    r.tau_decode = parse_double(k, v);
  } else if (k == "tau_candidate") {
    r.tau_candidate.fill(parse_double(k, v));
  } else if (k.rfind("tau_candidate.", 0) == 0) {
    const Attribute a = parse_name(k, std::string_view(k).substr(14), attribute_from_string);
    r.tau_candidate[index_of(a)] = parse_double(k, v);
  } else if (k == "data") {
    data_dir = path();
  } else if (k == "train") {
    train_path = path();
  } else if (k == "val") {
    val_path = path();
  } else if (k == "test") {
    test_path = path();
  } else if (k == "checkpoint") {
    checkpoint = path();
  } else if (k == "out") {
    out = path();
  } else {
    throw ConfigError("unknown config key '" + k + "'");
  }
}

void ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(file.string() + ": cannot open config");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set(std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string ExperimentConfig::dump() const {
  const ReasonerConfig& r = train.reasoner;
  std::ostringstream o;
  auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
  kv("regime", std::string(to_string(regime)));
  kv("strategy", std::string(to_string(strategy)));
  kv("n", std::to_string(n));
  kv("seed", std::to_string(train.seed));
  kv("variant", std::string(to_string(train.variant)));
  kv("baseline", std::string(to_string(baseline)));
  kv("noise", fmt(train.noise.epsilon, "%.17g"));
  kv("d", std::to_string(train.d));
  kv("lr", fmt(train.learning_rate, "%.17g"));
  kv("beta1", fmt(train.beta1, "%.17g"));
  kv("beta2", fmt(train.beta2, "%.17g"));
  kv("adam_epsilon", fmt(train.adam_epsilon, "%.17g"));
  kv("stage1_epochs", std::to_string(train.stage1_epochs));
  kv("stage2_epochs", std::to_string(train.stage2_epochs));
  kv("batch_size", std::to_string(train.batch_size));
  kv("aux_weight_stage1", fmt(train.aux_weight_stage1, "%.17g"));
  kv("aux_weight_stage2", fmt(train.aux_weight_stage2, "%.17g"));
  for (Attribute a : kAllAttributes) {
    for (RelationKind kind : kAllKinds) {
      kv("ridge." + attr_name(a) + "." + std::string(to_string(kind)),
         fmt(r.ridge[index_of(a)][static_cast<std::size_t>(kind)], "%.17g"));
    }
  }
  kv("tau_posterior", fmt(r.tau_posterior, "%.17g"));
  kv("tau_decode", fmt(r.tau_decode, "%.17g"));
  for (Attribute a : kAllAttributes) {
    kv("tau_candidate." + attr_name(a), fmt(r.tau_candidate[index_of(a)], "%.17g"));
  }
  if (data_dir) kv("data", data_dir->string());
  if (train_path) kv("train", train_path->string());
  if (val_path) kv("val", val_path->string());
  if (test_path) kv("test", test_path->string());
  if (checkpoint) kv("checkpoint", checkpoint->string());
  kv("out", out.string());
  return o.str();
}

void ExperimentConfig::validate() const {
  try {
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (n < 10) throw ConfigError("n must be at least 10, got " + std::to_string(n));
  const ReasonerConfig& r = train.reasoner;
  for (const auto& row : r.ridge)
    for (double l : row)
      if (!(l >= 0.0)) throw ConfigError("ridge strengths must be non-negative");
  if (!(r.tau_posterior > 0.0) || !(r.tau_decode > 0.0)) {
    throw ConfigError("temperatures must be positive");
  }
  for (double t : r.tau_candidate)
    if (!(t > 0.0)) throw ConfigError("temperatures must be positive");
}

std::optional<std::filesystem::path> fold_path(const ExperimentConfig& cfg, Phase phase) {
  const std::optional<std::filesystem::path>& explicit_path =
      phase == Phase::Train ? cfg.train_path : phase == Phase::Val ? cfg.val_path : cfg.test_path;
  if (explicit_path) return explicit_path;
  if (cfg.data_dir) return *cfg.data_dir / (std::string(to_string(phase)) + ".jsonl");
  return std::nullopt;
}

Folds load_folds(const ExperimentConfig& cfg) {
  const FoldSizes sizes = fold_sizes(cfg.n);
  auto fold = [&](Phase phase, std::size_t count) {
    if (const auto p = fold_path(cfg, phase)) {
      if (!std::filesystem::exists(*p)) throw IoError(p->string() + ": no such dataset file");
      return load_dataset(*p);
    }
    return generate_fold(cfg.regime, phase, cfg.strategy, count, cfg.seed());
  };
  return {fold(Phase::Train, sizes.train), fold(Phase::Val, sizes.val),
          fold(Phase::Test, sizes.test)};
}

std::uint64_t eval_seed(std::uint64_t seed) { return seed ^ 0x7e57'0000'7e57ULL; }

std::array<double, kNumAttributes> perception_accuracy(const std::vector<RpmInstance>& data,
                                                       const perception::NoiseModel& noise,
                                                       std::uint64_t seed) {
  std::array<std::size_t, kNumAttributes> right{};
  std::size_t panels = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RpmInstance& inst = data[i];
    const auto beliefs = beliefs_for(inst, noise, seed, i, 0);
    auto score = [&](const perception::BeliefState& b, const PanelSpec& truth) {
      ++panels;
      for (Attribute a : kAllAttributes) {
        int guess = 0;
        if (a == Attribute::Position) {
          for (int j = 0; j < kGridSlots; ++j) {
            if (b.position[static_cast<std::size_t>(j)] > 0.5) guess |= 1 << j;
          }
        } else {
          guess = perception::argmax(b.categorical(a));
        }
        if (guess == truth.value(a)) ++right[index_of(a)];
      }
    };
    for (std::size_t p = 0; p < 8; ++p) score(beliefs.context[p], inst.context[p]);
    for (std::size_t p = 0; p < 8; ++p) score(beliefs.candidates[p], inst.candidates[p]);
  }
  std::array<double, kNumAttributes> acc{};
  for (std::size_t ai = 0; ai < kNumAttributes; ++ai) {
    acc[ai] = panels ? static_cast<double>(right[ai]) / static_cast<double>(panels) : 0.0;
  }
  return acc;
}

ReportRow report_row(const std::vector<RpmInstance>& data, const Model& model,
                     const ReasonerConfig& reasoner, const perception::NoiseModel& noise,
                     std::uint64_t seed, Evaluation* eval) {
  Evaluation ev = evaluate(data, model, reasoner, noise, seed);
  ReportRow row;
  row.regime = data.empty() ? Regime::Systematicity : data.front().regime;
  row.variant = model.kind;
  row.noise = noise.epsilon;
  row.count = ev.outcomes.size();
  row.operator_accuracy = ev.operator_accuracy;
  std::size_t generated = 0;
  for (const auto& o : ev.outcomes) {
    row.correct += o.correct() ? 1 : 0;
    generated += o.generated_correct() ? 1 : 0;
    for (std::size_t ai = 0; ai < kNumAttributes; ++ai) {
      if (o.label[ai]) ++row.operator_count[ai];
      if (o.fallback[ai]) ++row.fallbacks;
    }
  }
  row.accuracy = ev.accuracy;
  row.generation_accuracy =
      row.count ? static_cast<double>(generated) / static_cast<double>(row.count) : 0.0;
  row.perception_accuracy = perception_accuracy(data, noise, seed);
  row.label = std::string(to_string(row.regime)) + "/" + std::string(to_string(row.variant));
  if (eval) *eval = std::move(ev);
  return row;
}

std::string ReportTable::to_text() const {
  std::ostringstream o;
  o << pad("run", 28) << pad("eps", 6) << lpad("n", 6) << lpad("acc", 8) << lpad("gen", 8)
    << "   operator kind (N P T S C)          perception (N P T S C)\n";
  for (const auto& r : rows) {
    o << pad(r.label, 28) << pad(fmt(r.noise, "%.2f"), 6) << lpad(std::to_string(r.count), 6)
      << lpad(fmt(r.accuracy, "%.3f"), 8) << lpad(fmt(r.generation_accuracy, "%.3f"), 8) << "  ";
    for (std::size_t ai = 0; ai < kNumAttributes; ++ai) o << lpad(fmt_opt(r.operator_accuracy[ai]), 7);
    o << "  ";
    for (std::size_t ai = 0; ai < kNumAttributes; ++ai) {
      o << lpad(fmt(r.perception_accuracy[ai], "%.3f"), 7);
    }
    o << '\n';
  }
  return o.str();
}

namespace {

json row_json(const ReportRow& r) {
  json j;
  j["record"] = "summary";
  j["label"] = r.label;
  j["regime"] = std::string(to_string(r.regime));
  j["variant"] = std::string(to_string(r.variant));
  j["noise"] = r.noise;
  j["count"] = r.count;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy;
  j["generation_accuracy"] = r.generation_accuracy;
  j["fallbacks"] = r.fallbacks;
  json ops = json::object(), opn = json::object(), perc = json::object();
  for (Attribute a : kAllAttributes) {
    const std::size_t ai = index_of(a);
    ops[attr_name(a)] = opt_json(r.operator_accuracy[ai]);
    opn[attr_name(a)] = r.operator_count[ai];
    perc[attr_name(a)] = r.perception_accuracy[ai];
  }
  j["operator_accuracy"] = ops;
  j["operator_count"] = opn;
  j["perception_accuracy"] = perc;
  return j;
}

}  // namespace

std::string ReportTable::to_records() const {
  std::string out;
  for (const auto& r : rows) out += row_json(r).dump() + '\n';
  return out;
}

std::string instance_records(const Evaluation& eval, const ReportRow& row) {
  std::string out;
  for (const auto& o : eval.outcomes) {
    json j;
    j["record"] = "instance";
    j["id"] = o.id;
    j["answer_index"] = o.answer_index;
    j["predicted"] = o.predicted;
    j["correct"] = o.correct();
    j["answer_probability"] = o.answer_probability;
    json ops = json::object();
    for (Attribute a : kAllAttributes) {
      const std::size_t ai = index_of(a);
      json e;
      e["label"] = o.label[ai] ? json(std::string(to_string(*o.label[ai]))) : json(nullptr);
      e["predicted"] = std::string(to_string(o.predicted_kind[ai]));
      e["generated"] = o.generated.value[ai];
      e["generated_match"] = o.generated_match[ai] ? json(*o.generated_match[ai]) : json(nullptr);
      e["fallback"] = o.fallback[ai];
      ops[attr_name(a)] = e;
    }
    j["attributes"] = ops;
    j["generated_correct"] = o.generated_correct();
    out += j.dump() + '\n';
  }
  out += row_json(row).dump() + '\n';
  return out;
}

TrainedExperiment run_experiment(const ExperimentConfig& cfg, const Folds& folds) {
  TrainConfig tc = cfg.train;
  TrainedExperiment out{train(folds.train, folds.val, tc), {}};
  out.test = report_row(folds.test, out.result.model, tc.reasoner, tc.effective_noise(),
                        eval_seed(tc.seed));
  return out;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<Regime>& regimes) {
  std::vector<AblationRow> rows;
  for (Regime regime : regimes) {
    ExperimentConfig c = cfg;
    c.regime = regime;
    const Folds folds = load_folds(c);
    AblationRow row;
    row.regime = regime;
    row.primary = run_experiment(c, folds).test;
    c.train.variant = cfg.baseline;
    row.baseline = run_experiment(c, folds).test;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_text(const std::vector<AblationRow>& rows) {
  std::ostringstream o;
  if (rows.empty()) return {};
  const std::string a(to_string(rows.front().primary.variant));
  const std::string b(to_string(rows.front().baseline.variant));
  o << pad("regime", 16) << pad("eps", 6) << lpad(a, 12) << lpad(b, 12) << lpad("delta", 10) << '\n';
  double sa = 0.0, sb = 0.0;
  for (const auto& r : rows) {
    o << pad(std::string(to_string(r.regime)), 16) << pad(fmt(r.primary.noise, "%.2f"), 6)
      << lpad(fmt(100.0 * r.primary.accuracy, "%.2f"), 12)
      << lpad(fmt(100.0 * r.baseline.accuracy, "%.2f"), 12)
      << lpad(fmt(100.0 * r.delta(), "%+.2f"), 10) << '\n';
    sa += r.primary.accuracy;
    sb += r.baseline.accuracy;
  }
  const double n = static_cast<double>(rows.size());
  o << pad("average", 22) << lpad(fmt(100.0 * sa / n, "%.2f"), 12)
    << lpad(fmt(100.0 * sb / n, "%.2f"), 12) << lpad(fmt(100.0 * (sa - sb) / n, "%+.2f"), 10)
    << '\n';
  return o.str();
}

std::string ablation_records(const std::vector<AblationRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    json j;
    j["record"] = "ablation";
    j["regime"] = std::string(to_string(r.regime));
    j["primary"] = row_json(r.primary);
    j["baseline"] = row_json(r.baseline);
    j["delta"] = r.delta();
    out += j.dump() + '\n';
  }
  return out;
}

std::string solve_trace(const RpmInstance& inst, const Model& model, const ReasonerConfig& reasoner,
                        const perception::NoiseModel& noise, std::uint64_t seed) {
  const auto beliefs = beliefs_for(inst, noise, seed, 0, 0);
  const AnswerDistribution dist = answer_distribution(beliefs, model, reasoner);
  const GeneratedPanel gen = generate_panel(dist);
  std::ostringstream o;
  o << "instance " << inst.id << " (" << to_string(inst.regime) << ", "
    << to_string(model.kind) << ", eps " << fmt(noise.epsilon, "%.2f") << ")\n";

  for (Attribute a : kAllAttributes) {
    const std::size_t ai = index_of(a);
    const AttributeTrace& t = dist.attributes[ai];
    o << "\n[" << attr_name(a) << "] rule ";
    if (const auto& rel = inst.rules.at(a)) {
      o << to_string(rel->variant) << " (" << to_string(rel->kind()) << ")"
        << (rel->implied ? " implied" : "");
    } else {
      o << "none";
    }
    o << '\n';
    if (t.fallback) {
      o << "  fallback: " << t.fallback_reason << '\n';
      continue;
    }
    for (RelationKind k : kAllKinds) {
      const KindTrace& kt = t.kinds[static_cast<std::size_t>(k)];
      if (!kt.induced) continue;
      o << "  " << pad(std::string(to_string(k)), 8) << " posterior " << fmt(t.posterior[static_cast<std::size_t>(k)])
        << "  residual " << fmt(kt.op.residual, "%.3e") << "  objective "
        << fmt(kt.op.objective, "%.3e") << "  ridge " << fmt(kt.op.ridge, "%.0e")
        << '\n';
    }
    const KindTrace& best = t.kinds[static_cast<std::size_t>(t.predicted_kind())];
    if (a == Attribute::Position) {
      o << "  predicted occupancy";
      for (Eigen::Index j = 0; j < best.position_prediction.size(); ++j) {
        o << ' ' << fmt(best.position_prediction(j), "%.2f");
      }
      o << '\n';
    } else {
      o << "  decoded belief";
      for (std::size_t v = 0; v < best.decoded.size(); ++v) {
        if (best.decoded[v] >= 0.01) o << "  " << v << ":" << fmt(best.decoded[v], "%.2f");
      }
      o << '\n';
    }
    o << "  candidate distance";
    for (double d : best.distance) o << ' ' << fmt(d, "%.3f");
    o << "\n  generated " << value_string(a, gen.value[ai]) << ", answer "
      << value_string(a, inst.answer().value(a)) << '\n';
  }

  o << "\ncandidate probabilities\n";
  for (std::size_t n = 0; n < 8; ++n) {
    o << "  " << n << "  " << fmt(dist.probability[n]) << (static_cast<int>(n) == dist.predicted() ? "  selected" : "")
      << (static_cast<int>(n) == inst.answer_index ? "  answer" : "") << '\n';
  }
  o << "generated panel:";
  for (Attribute a : kAllAttributes) {
    o << ' ' << attr_name(a) << '=' << value_string(a, gen.value[index_of(a)]);
  }
  o << '\n';
  return o.str();
}

}  // namespace alans
