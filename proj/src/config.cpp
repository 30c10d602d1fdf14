// Copyright 2026 The spoofdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spoofdiar/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <sstream>

#include "spoofdiar/binary_io.hpp"
#include "spoofdiar/errors.hpp"

namespace spoofdiar {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(std::string_view where, std::string_view value, std::string_view expected) {
  throw ConfigError(std::string(where) + ": invalid value '" + std::string(value) + "' (expected " +
                    std::string(expected) + ")");
}

template <typename Int>
Int parse_int(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad(where, text, "integer");
  return v;
}

double parse_double(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad(where, text, "number");
  return v;
}

bool parse_bool(std::string_view where, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad(where, text, "true/false");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename Int>
std::string fmt_int(Int v) {
  return std::to_string(v);
}

pt::ptree read_ini_text(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  return tree;
}

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::merged ? "merged" : "dual_branch"; }
std::string to_string(LabelScheme s) { return s == LabelScheme::mul ? "mul" : "spf"; }
std::string to_string(TokenTargets t) {
  if (t.dia && t.loc) return "dia,loc";
  if (t.dia) return "dia";
  if (t.loc) return "loc";
  return "none";
}
std::string to_string(Linkage l) {
  switch (l) {
    case Linkage::average: return "average";
    case Linkage::complete: return "complete";
    case Linkage::single: return "single";
  }
  return "?";
}
std::string to_string(ClusterScope s) {
  switch (s) {
    case ClusterScope::automatic: return "auto";
    case ClusterScope::predicted_spoof: return "predicted_spoof";
    case ClusterScope::all_frames: return "all_frames";
  }
  return "?";
}
std::string to_string(UttPooling p) { return p == UttPooling::min ? "min" : "mean"; }
std::string to_string(Selection s) { return s == Selection::dev_loss ? "dev_loss" : "dev_jer"; }

void apply_setting(CorpusSpec& c, std::string_view key, std::string_view value) {
  const std::string where = "corpus." + std::string(key);
  auto i = [&] { return parse_int<int>(where, value); };
  auto d = [&] { return parse_double(where, value); };
  if (key == "n_train") c.n_train = i();
  else if (key == "n_dev") c.n_dev = i();
  else if (key == "n_eval") c.n_eval = i();
  else if (key == "num_classes") c.num_classes = i();
  else if (key == "d_feat") c.d_feat = i();
  else if (key == "min_frames") c.min_frames = i();
  else if (key == "max_frames") c.max_frames = i();
  else if (key == "min_segment") c.min_segment = i();
  else if (key == "max_segment") c.max_segment = i();
  else if (key == "class_separation") c.class_separation = d();
  else if (key == "noise_std") c.noise_std = d();
  else if (key == "unseen_eval_methods") c.unseen_eval_methods = i();
  else if (key == "bona_fraction") c.bona_fraction = d();
  else if (key == "bona_utterance_fraction") c.bona_utterance_fraction = d();
  else if (key == "max_silence_frames") c.max_silence_frames = i();
  else if (key == "channel_std") c.channel_std = d();
  else if (key == "resolution") c.resolution = d();
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(where, value);
  else throw ConfigError("unknown key " + where);
}

namespace {

void apply_model(ModelConfig& m, std::string_view key, std::string_view value) {
  const std::string where = "model." + std::string(key);
  const std::string v = trim(value);
  auto i = [&] { return parse_int<int>(where, value); };
  if (key == "d") m.d = i();
  else if (key == "n_layers") m.n_layers = i();
  else if (key == "n_heads") m.n_heads = i();
  else if (key == "d_ff") m.d_ff = i();
  else if (key == "gmlp_depth") m.gmlp_depth = i();
  else if (key == "gmlp_d_ffn") m.gmlp_d_ffn = i();
  else if (key == "max_len") m.max_len = i();
  else if (key == "token_init_scale") m.token_init_scale = parse_double(where, value);
  else if (key == "attractor_tokens") m.use_attractor_tokens = parse_bool(where, value);
  else if (key == "loc_loss") m.use_loc_loss = parse_bool(where, value);
  else if (key == "positional_encoding") m.positional_encoding = parse_bool(where, value);
  else if (key == "architecture") {
    if (v == "merged") m.architecture = Architecture::merged;
    else if (v == "dual_branch") m.architecture = Architecture::dual_branch;
    else bad(where, value, "merged|dual_branch");
  } else if (key == "label_scheme") {
    if (v == "mul") m.label_scheme = LabelScheme::mul;
    else if (v == "spf") m.label_scheme = LabelScheme::spf;
    else bad(where, value, "mul|spf");
  } else if (key == "token_targets") {
    TokenTargets t{false, false};
    for (const auto& item : split_list(v)) {
      if (item == "dia") t.dia = true;
      else if (item == "loc") t.loc = true;
      else if (item != "none") bad(where, value, "comma list of dia, loc, or none");
    }
    m.token_targets = t;
  } else {
    throw ConfigError("unknown key " + where);
  }
}

void apply_inference(ExperimentConfig& c, std::string_view key, std::string_view value) {
  const std::string where = "inference." + std::string(key);
  const std::string v = trim(value);
  auto& in = c.inference;
  if (key == "threshold") in.threshold = parse_double(where, value);
  else if (key == "oracle_k") in.oracle_k = parse_bool(where, value);
  else if (key == "k") {
    if (v.empty() || v == "none") in.k_override.reset();
    else in.k_override = parse_int<int>(where, value);
  } else if (key == "linkage") {
    if (v == "average") in.linkage = Linkage::average;
    else if (v == "complete") in.linkage = Linkage::complete;
    else if (v == "single") in.linkage = Linkage::single;
    else bad(where, value, "average|complete|single");
  } else if (key == "scope") {
    if (v == "auto") in.scope = ClusterScope::automatic;
    else if (v == "predicted_spoof") in.scope = ClusterScope::predicted_spoof;
    else if (v == "all_frames") in.scope = ClusterScope::all_frames;
    else bad(where, value, "auto|predicted_spoof|all_frames");
  } else if (key == "utt_pooling") {
    if (v == "min") c.utt_pooling = UttPooling::min;
    else if (v == "mean") c.utt_pooling = UttPooling::mean;
    else bad(where, value, "min|mean");
  } else {
    throw ConfigError("unknown key " + where);
  }
}

void apply_train(TrainConfig& t, std::string_view key, std::string_view value) {
  const std::string where = "train." + std::string(key);
  auto d = [&] { return parse_double(where, value); };
  if (key == "epochs") t.epochs = parse_int<int>(where, value);
  else if (key == "batch_size") t.batch_size = parse_int<int>(where, value);
  else if (key == "learning_rate") t.learning_rate = d();
  else if (key == "beta1") t.beta1 = d();
  else if (key == "beta2") t.beta2 = d();
  else if (key == "adam_epsilon") t.adam_epsilon = d();
  else if (key == "grad_clip") t.grad_clip = d();
  else if (key == "include_masked") t.include_masked = parse_bool(where, value);
  else if (key == "selection") {
    const std::string v = trim(value);
    if (v == "dev_loss") t.selection = Selection::dev_loss;
    else if (v == "dev_jer") t.selection = Selection::dev_jer;
    else bad(where, value, "dev_loss|dev_jer");
  } else {
    throw ConfigError("unknown key " + where);
  }
}

void apply_experiment(ExperimentConfig& c, std::string_view key, std::string_view value) {
  const std::string where = "experiment." + std::string(key);
  if (key == "name") c.name = trim(value);
  else if (key == "out_dir") c.out_dir = trim(value);
  else if (key == "corpus_dir") c.corpus_dir = trim(value);
  else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& s : split_list(value)) c.seeds.push_back(parse_int<std::uint64_t>(where, s));
  } else {
    throw ConfigError("unknown key " + where);
  }
}

}  // namespace

void apply_setting(ExperimentConfig& c, const Setting& s) {
  if (s.section == "corpus") apply_setting(c.corpus, s.key, s.value);
  else if (s.section == "model") apply_model(c.model, s.key, s.value);
  else if (s.section == "inference") apply_inference(c, s.key, s.value);
  else if (s.section == "train") apply_train(c.train, s.key, s.value);
  else if (s.section == "experiment") apply_experiment(c, s.key, s.value);
  else throw ConfigError("unknown section [" + s.section + "]");
}

void ExperimentConfig::sync_model() {
  model.d_feat = corpus.d_feat;
  model.num_classes = corpus.seen_classes();
}

void ExperimentConfig::validate() const {
  corpus.validate();
  model.validate();
  inference.validate();
  train.validate();
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (model.d_feat != corpus.d_feat) throw ConfigError("model d_feat does not match corpus.d_feat");
  if (model.num_classes != corpus.seen_classes()) {
    throw ConfigError("model class count does not match the corpus seen classes");
  }
}

namespace {

void apply_tree(ExperimentConfig& c, const pt::ptree& tree, bool allow_grid) {
  for (const auto& [section, body] : tree) {
    if (allow_grid && (section == "grid" || section.rfind("cell:", 0) == 0)) continue;
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' outside of a section");
    }
    for (const auto& [key, value] : body) apply_setting(c, {section, key, value.data()});
  }
  c.sync_model();
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig c;
  apply_tree(c, read_ini_text(text), false);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return parse_experiment_config(io::read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

std::string corpus_spec_to_ini(const CorpusSpec& c) {
  std::ostringstream os;
  os << "[corpus]\n"
     << "n_train = " << c.n_train << "\n"
     << "n_dev = " << c.n_dev << "\n"
     << "n_eval = " << c.n_eval << "\n"
     << "num_classes = " << c.num_classes << "\n"
     << "d_feat = " << c.d_feat << "\n"
     << "min_frames = " << c.min_frames << "\n"
     << "max_frames = " << c.max_frames << "\n"
     << "min_segment = " << c.min_segment << "\n"
     << "max_segment = " << c.max_segment << "\n"
     << "class_separation = " << fmt(c.class_separation) << "\n"
     << "noise_std = " << fmt(c.noise_std) << "\n"
     << "unseen_eval_methods = " << c.unseen_eval_methods << "\n"
     << "bona_fraction = " << fmt(c.bona_fraction) << "\n"
     << "bona_utterance_fraction = " << fmt(c.bona_utterance_fraction) << "\n"
     << "max_silence_frames = " << c.max_silence_frames << "\n"
     << "channel_std = " << fmt(c.channel_std) << "\n"
     << "resolution = " << fmt(c.resolution) << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

CorpusSpec parse_corpus_spec(std::string_view text) {
  CorpusSpec spec;
  for (const auto& [section, body] : read_ini_text(text)) {
    if (section != "corpus") throw ConfigError("unexpected section [" + section + "] in corpus spec");
    for (const auto& [key, value] : body) apply_setting(spec, key, value.data());
  }
  return spec;
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& m = c.model;
  const auto& in = c.inference;
  const auto& t = c.train;
  os << "[experiment]\n"
     << "name = " << c.name << "\n"
     << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << "\n"
     << "out_dir = " << c.out_dir << "\n"
     << "corpus_dir = " << c.corpus_dir << "\n\n"
     << corpus_spec_to_ini(c.corpus) << "\n"
     << "[model]\n"
     << "architecture = " << to_string(m.architecture) << "\n"
     << "attractor_tokens = " << fmt(m.use_attractor_tokens) << "\n"
     << "token_targets = " << to_string(m.token_targets) << "\n"
     << "label_scheme = " << to_string(m.label_scheme) << "\n"
     << "loc_loss = " << fmt(m.use_loc_loss) << "\n"
     << "d = " << m.d << "\n"
     << "n_layers = " << m.n_layers << "\n"
     << "n_heads = " << m.n_heads << "\n"
     << "d_ff = " << m.d_ff << "\n"
     << "gmlp_depth = " << m.gmlp_depth << "\n"
     << "gmlp_d_ffn = " << m.gmlp_d_ffn << "\n"
     << "max_len = " << m.max_len << "\n"
     << "positional_encoding = " << fmt(m.positional_encoding) << "\n"
     << "token_init_scale = " << fmt(m.token_init_scale) << "\n\n"
     << "[inference]\n"
     << "threshold = " << fmt(in.threshold) << "\n"
     << "linkage = " << to_string(in.linkage) << "\n"
     << "scope = " << to_string(in.scope) << "\n"
     << "oracle_k = " << fmt(in.oracle_k) << "\n"
     << "k = " << (in.k_override ? std::to_string(*in.k_override) : std::string("none")) << "\n"
     << "utt_pooling = " << to_string(c.utt_pooling) << "\n\n"
     << "[train]\n"
     << "epochs = " << t.epochs << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "learning_rate = " << fmt(t.learning_rate) << "\n"
     << "beta1 = " << fmt(t.beta1) << "\n"
     << "beta2 = " << fmt(t.beta2) << "\n"
     << "adam_epsilon = " << fmt(t.adam_epsilon) << "\n"
     << "grad_clip = " << fmt(t.grad_clip) << "\n"
     << "include_masked = " << fmt(t.include_masked) << "\n"
     << "selection = " << to_string(t.selection) << "\n";
  return os.str();
}

AblationGrid parse_grid(std::string_view text, const std::filesystem::path& base_dir) {
  const pt::ptree tree = read_ini_text(text);
  AblationGrid grid;
  std::vector<std::uint64_t> seeds;
  if (auto g = tree.get_child_optional("grid")) {
    for (const auto& [key, value] : *g) {
      if (key == "name") {
        grid.name = trim(value.data());
      } else if (key == "base") {
        grid.base = load_experiment_config(base_dir / trim(value.data()));
      } else if (key == "seeds") {
        for (const auto& s : split_list(value.data())) seeds.push_back(parse_int<std::uint64_t>("grid.seeds", s));
      } else {
        throw ConfigError("unknown key grid." + key);
      }
    }
  }
  // Sections other than [grid] / [cell:*] patch the base config.
  apply_tree(grid.base, tree, true);
  if (!seeds.empty()) grid.base.seeds = seeds;
  for (const auto& [section, body] : tree) {
    if (section.rfind("cell:", 0) != 0) continue;
    GridCell cell;
    cell.name = trim(section.substr(5));
    if (cell.name.empty()) throw ConfigError("grid cell with an empty name");
    for (const auto& [key, value] : body) {
      const auto dot = key.find('.');
      if (dot == std::string::npos) {
        throw ConfigError("cell " + cell.name + ": override '" + key + "' must be section.key");
      }
      cell.overrides.push_back({key.substr(0, dot), key.substr(dot + 1), value.data()});
    }
    grid.cells.push_back(std::move(cell));
  }
  if (grid.cells.empty()) grid.cells.push_back({"baseline", {}});
  for (const auto& cell : grid.cells) cell_config(grid, cell).validate();
  return grid;
}

AblationGrid load_grid(const std::filesystem::path& path) {
  return parse_grid(io::read_text_file(path), path.parent_path());
}

ExperimentConfig cell_config(const AblationGrid& grid, const GridCell& cell) {
  ExperimentConfig c = grid.base;
  for (const auto& s : cell.overrides) {
    try {
      apply_setting(c, s);
    } catch (const ConfigError& e) {
      throw ConfigError("cell " + cell.name + ": " + e.what());
    }
  }
  c.sync_model();
  c.name = grid.name + "/" + cell.name;
  return c;
}

}  // namespace spoofdiar
