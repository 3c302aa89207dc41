#include "orch/evalkit/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "orch/error.hpp"
#include "orch/util/text.hpp"

namespace orch::evalkit {

using json = nlohmann::json;

void LabeledSet::add(std::string id, std::string label) {
  id = std::string(util::trim(id));
  label = std::string(util::trim(label));
  if (id.empty()) throw Error(ErrorCode::invalid_argument, source_ + ": empty document id");
  if (!index_.emplace(id, entries_.size()).second) {
    throw Error(ErrorCode::invalid_argument, source_ + ": duplicate document id '" + id + "'");
  }
  entries_.emplace_back(std::move(id), std::move(label));
}

const std::string* LabeledSet::find(std::string_view id) const noexcept {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

Kappa kappa_from_matrix(const Matrix& m) {
  const std::size_t k = m.size();
  std::vector<std::int64_t> rows(k, 0), cols(k, 0);
  std::int64_t n = 0, trace = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (m[i].size() != k) throw Error(ErrorCode::invalid_argument, "confusion matrix must be square");
    for (std::size_t j = 0; j < k; ++j) {
      if (m[i][j] < 0) throw Error(ErrorCode::invalid_argument, "confusion matrix has a negative count");
      rows[i] += m[i][j];
      cols[j] += m[i][j];
      n += m[i][j];
    }
    trace += m[i][i];
  }
  if (n == 0) throw Error(ErrorCode::invalid_argument, "confusion matrix is empty");
  std::int64_t chance = 0;  // n^2 * p_e
  for (std::size_t i = 0; i < k; ++i) chance += rows[i] * cols[i];
  const std::int64_t n2 = n * n;
  if (chance == n2) return {1.0, true};
  // (p_o - p_e) / (1 - p_e) with both scaled by n^2
  return {static_cast<double>(trace * n - chance) / static_cast<double>(n2 - chance), false};
}

EvalReport evaluate(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels) {
  auto index_of = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (util::iequals(labels.names()[i], name)) return i;
    }
    return std::nullopt;
  };

  EvalReport r;
  r.source = pred.source();
  r.labels = labels.names();
  const std::size_t k = labels.size();
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  r.off_label.assign(k, 0);
  r.n_total = gt.size();

  std::vector<std::string> missing;
  for (auto& [id, truth] : gt.entries()) {
    if (util::iequals(truth, kIndeterminate)) {
      ++r.n_excluded;
      continue;
    }
    auto row = index_of(truth);
    if (!row) {
      throw Error(ErrorCode::invalid_argument, gt.source() + ": '" + id + "' has label '" + truth + "' outside the label set");
    }
    const std::string* p = pred.find(id);
    if (!p) {
      missing.push_back(id);
      continue;
    }
    ++r.n_scored;
    if (auto col = index_of(*p)) {
      ++r.confusion[*row][*col];
      if (*col == *row) ++r.n_correct;
    } else {
      ++r.off_label[*row];
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::id_mismatch, pred.source() + ": no prediction for " + std::to_string(missing.size()) +
                                            " scored id(s): " + util::join(missing, ", "));
  }
  if (r.n_scored == 0) throw Error(ErrorCode::invalid_argument, gt.source() + ": no determinate documents to score");

  r.accuracy = static_cast<double>(r.n_correct) / static_cast<double>(r.n_scored);

  // Off-label predictions act as one extra predicted category that no GT
  // row owns, so they lower p_o without contributing to p_e.
  std::int64_t n = static_cast<std::int64_t>(r.n_scored);
  std::int64_t chance = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::int64_t row = r.off_label[i], col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += r.confusion[i][j];
      col += r.confusion[j][i];
    }
    chance += row * col;
    r.recall.push_back(row ? std::optional<double>(static_cast<double>(r.confusion[i][i]) / static_cast<double>(row))
                           : std::nullopt);
  }
  const std::int64_t n2 = n * n;
  if (chance == n2) {
    r.kappa = {1.0, true};
  } else {
    r.kappa = {static_cast<double>(static_cast<std::int64_t>(r.n_correct) * n - chance) /
                   static_cast<double>(n2 - chance),
               false};
  }
  return r;
}

double accuracy(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels) {
  return evaluate(pred, gt, labels).accuracy;
}

Kappa cohen_kappa(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels) {
  return evaluate(pred, gt, labels).kappa;
}

Matrix confusion(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels) {
  return evaluate(pred, gt, labels).confusion;
}

LabelOrder infer_labels(const LabeledSet& gt) {
  std::set<std::string> names;
  for (auto& [_, l] : gt.entries()) {
    if (!util::iequals(l, kIndeterminate)) names.insert(l);
  }
  if (names.size() < 2) names.insert("(other)");
  return LabelOrder({names.begin(), names.end()});
}

namespace {

std::vector<std::string> csv_row(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  for (auto& cell : out) cell = std::string(util::trim(cell));
  return out;
}

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

LabeledSet read_labeled(const std::filesystem::path& path, std::string source) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, path.string() + ": cannot open");
  LabeledSet set(source.empty() ? path.stem().string() : std::move(source));
  std::string line;
  int lineno = 0;
  const bool csv = path.extension() == ".csv";
  std::size_t id_col = 0, label_col = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (csv) {
      auto cells = csv_row(line);
      if (lineno == 1) {
        auto id_it = std::find_if(cells.begin(), cells.end(),
                                  [](auto& c) { return util::iequals(c, "id") || util::iequals(c, "document_id"); });
        if (id_it != cells.end()) {
          id_col = static_cast<std::size_t>(id_it - cells.begin());
          auto lab = std::find_if(cells.begin(), cells.end(),
                                  [](auto& c) { return util::iequals(c, "label") || util::iequals(c, "final_label"); });
          if (lab == cells.end()) throw Error(ErrorCode::malformed, where + ": header has no label column");
          label_col = static_cast<std::size_t>(lab - cells.begin());
          continue;
        }
      }
      if (cells.size() <= std::max(id_col, label_col)) throw Error(ErrorCode::malformed, where + ": too few columns");
      set.add(cells[id_col], cells[label_col]);
    } else {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::malformed, where + ": " + e.what());
      }
      auto pick = [&](std::initializer_list<const char*> keys) -> std::string {
        for (auto* k : keys) {
          if (auto it = j.find(k); it != j.end() && it->is_string()) return it->get<std::string>();
        }
        throw Error(ErrorCode::malformed, where + ": missing " + std::string(*keys.begin()));
      };
      set.add(pick({"id", "document_id"}), pick({"label", "final_label"}));
    }
  }
  return set;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", fraction * 100.0);
  return buf;
}

json to_json(const EvalReport& r) {
  json recall = json::object();
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    recall[r.labels[i]] = r.recall[i] ? json(*r.recall[i]) : json(nullptr);
  }
  return {{"source", r.source},
          {"labels", r.labels},
          {"n_total", r.n_total},
          {"n_excluded", r.n_excluded},
          {"n_scored", r.n_scored},
          {"n_correct", r.n_correct},
          {"accuracy", r.accuracy},
          {"accuracy_percent", format_percent(r.accuracy)},
          {"kappa", r.kappa.value},
          {"kappa_degenerate", r.kappa.degenerate},
          {"confusion", r.confusion},
          {"off_label", r.off_label},
          {"recall", recall}};
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::size_t width = 6;
  for (auto& r : reports) width = std::max(width, r.source.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %8s  %8s\n", static_cast<int>(width), "Source", "Scored", "Excluded",
                "Accuracy", "Kappa");
  out += buf;
  for (auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8zu  %8zu  %8s  %8.4f%s\n", static_cast<int>(width), r.source.c_str(),
                  r.n_scored, r.n_excluded, format_percent(r.accuracy).c_str(), r.kappa.value,
                  r.kappa.degenerate ? " (degenerate)" : "");
    out += buf;
  }
  for (auto& r : reports) {
    out += "\nConfusion matrix for " + r.source + " (rows: ground truth, columns: predicted)\n";
    std::size_t lw = 4;
    for (auto& l : r.labels) lw = std::max(lw, l.size());
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(lw), "");
    out += buf;
    for (std::size_t j = 0; j < r.labels.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "  %4zu", j + 1);
      out += buf;
    }
    bool any_off = std::any_of(r.off_label.begin(), r.off_label.end(), [](auto v) { return v > 0; });
    if (any_off) out += "  other";
    out += "\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(lw), r.labels[i].c_str());
      out += buf;
      for (auto v : r.confusion[i]) {
        std::snprintf(buf, sizeof(buf), "  %4lld", static_cast<long long>(v));
        out += buf;
      }
      if (any_off) {
        std::snprintf(buf, sizeof(buf), "  %5lld", static_cast<long long>(r.off_label[i]));
        out += buf;
      }
      out += "\n";
    }
    out += "Columns:";
    for (std::size_t j = 0; j < r.labels.size(); ++j) out += " " + std::to_string(j + 1) + "=" + r.labels[j];
    out += "\n";
  }
  return out;
}

std::string confusion_csv(const EvalReport& r) {
  bool any_off = std::any_of(r.off_label.begin(), r.off_label.end(), [](auto v) { return v > 0; });
  std::string out = "ground_truth";
  for (auto& l : r.labels) out += "," + csv_cell(l);
  if (any_off) out += ",other";
  out += "\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    out += csv_cell(r.labels[i]);
    for (auto v : r.confusion[i]) out += "," + std::to_string(v);
    if (any_off) out += "," + std::to_string(r.off_label[i]);
    out += "\n";
  }
  return out;
}

}  // namespace orch::evalkit
