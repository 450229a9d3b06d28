#include "contextstrip/evaluation/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "contextstrip/core/error.hpp"

namespace cstrip {

namespace {

void accumulate(const std::optional<double>& value, double& sum, int& count, int& excluded) {
  if (value) {
    sum += *value;
    ++count;
  } else {
    ++excluded;
  }
}

std::optional<double> mean(double sum, int count) {
  if (count == 0) return std::nullopt;
  return sum / count;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json means_json(const MetricMeans& m) {
  return {{"subjects", m.subjects},
          {"dice", optional_json(m.dice)},
          {"sensitivity", optional_json(m.sensitivity)},
          {"specificity", optional_json(m.specificity)},
          {"excluded",
           {{"dice", m.dice_excluded},
            {"sensitivity", m.sensitivity_excluded},
            {"specificity", m.specificity_excluded}}}};
}

MetricMeans means_from(const nlohmann::json& j) {
  MetricMeans m;
  j.at("subjects").get_to(m.subjects);
  m.dice = optional_from(j.at("dice"));
  m.sensitivity = optional_from(j.at("sensitivity"));
  m.specificity = optional_from(j.at("specificity"));
  const auto& ex = j.at("excluded");
  ex.at("dice").get_to(m.dice_excluded);
  ex.at("sensitivity").get_to(m.sensitivity_excluded);
  ex.at("specificity").get_to(m.specificity_excluded);
  return m;
}

std::string pad(const std::string& s, std::size_t width) {
  return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
}

void table_rows(std::ostringstream& os, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      os << (c ? " | " : "") << (c + 1 == rows[i].size() ? rows[i][c] : pad(rows[i][c], widths[c]));
    }
    os << '\n';
    if (i == 0) {
      for (std::size_t c = 0; c < widths.size(); ++c) {
        os << (c ? "-+-" : "") << std::string(widths[c], '-');
      }
      os << '\n';
    }
  }
}

}  // namespace

std::string crossval_tag(int k) { return "crossval " + std::to_string(k); }

std::string transfer_tag(const std::string& source, const std::string& target) {
  return "transfer " + source + "->" + target;
}

SubjectScore score_subject(const std::string& subject_id, int fold,
                           std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  SubjectScore s;
  s.subject_id = subject_id;
  s.fold = fold;
  s.counts = confusion(pred, truth);
  s.dice = dice_score(s.counts);
  s.sensitivity = sensitivity(s.counts);
  s.specificity = specificity(s.counts);
  return s;
}

MetricMeans mean_scores(std::span<const SubjectScore> scores) {
  MetricMeans m;
  m.subjects = static_cast<int>(scores.size());
  double d = 0, se = 0, sp = 0;
  int nd = 0, nse = 0, nsp = 0;
  for (const auto& s : scores) {
    accumulate(s.dice, d, nd, m.dice_excluded);
    accumulate(s.sensitivity, se, nse, m.sensitivity_excluded);
    accumulate(s.specificity, sp, nsp, m.specificity_excluded);
  }
  m.dice = mean(d, nd);
  m.sensitivity = mean(se, nse);
  m.specificity = mean(sp, nsp);
  return m;
}

MetricsReport make_report(std::string protocol, std::string dataset, std::uint64_t seed,
                          std::vector<SubjectScore> subjects, int k) {
  MetricsReport r;
  r.protocol = std::move(protocol);
  r.dataset = std::move(dataset);
  r.seed = seed;
  r.subjects = std::move(subjects);
  for (int f = 0; f < k; ++f) {
    std::vector<SubjectScore> in_fold;
    for (const auto& s : r.subjects) {
      if (s.fold == f) in_fold.push_back(s);
    }
    r.folds.push_back(mean_scores(in_fold));
  }
  r.overall = mean_scores(r.subjects);
  return r;
}

std::string format_percent(const std::optional<double>& value) {
  if (!value) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *value * 100.0);
  return buf;
}

std::string format_table(const MetricsReport& report) {
  std::ostringstream os;
  os << "protocol: " << report.protocol << "  dataset: " << report.dataset
     << "  subjects: " << report.subjects.size() << "  seed: " << report.seed << "\n\n";
  table_rows(os, {{"Method", "Dice", "Sensitivity", "Specificity"},
                  {report.method, format_percent(report.overall.dice),
                   format_percent(report.overall.sensitivity),
                   format_percent(report.overall.specificity)}});
  const auto& o = report.overall;
  if (o.dice_excluded || o.sensitivity_excluded || o.specificity_excluded) {
    os << "\nundefined values left out of the means: dice " << o.dice_excluded << ", sensitivity "
       << o.sensitivity_excluded << ", specificity " << o.specificity_excluded << '\n';
  }
  if (!report.folds.empty()) {
    os << '\n';
    std::vector<std::vector<std::string>> rows{{"Fold", "Dice", "Sensitivity", "Specificity"}};
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
      const auto& m = report.folds[f];
      rows.push_back({std::to_string(f), format_percent(m.dice), format_percent(m.sensitivity),
                      format_percent(m.specificity)});
    }
    table_rows(os, rows);
  }
  os << '\n';
  std::vector<std::vector<std::string>> rows{{"Subject", "Fold", "Dice", "Sensitivity", "Specificity"}};
  for (const auto& s : report.subjects) {
    rows.push_back({s.subject_id, s.fold < 0 ? "-" : std::to_string(s.fold), format_percent(s.dice),
                    format_percent(s.sensitivity), format_percent(s.specificity)});
  }
  table_rows(os, rows);
  return os.str();
}

void to_json(nlohmann::json& j, const MetricsReport& report) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : report.subjects) {
    subjects.push_back({{"subject_id", s.subject_id},
                        {"fold", s.fold},
                        {"tp", s.counts.tp},
                        {"fp", s.counts.fp},
                        {"tn", s.counts.tn},
                        {"fn", s.counts.fn},
                        {"dice", optional_json(s.dice)},
                        {"sensitivity", optional_json(s.sensitivity)},
                        {"specificity", optional_json(s.specificity)}});
  }
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) folds.push_back(means_json(f));
  j = nlohmann::json{{"protocol", report.protocol}, {"method", report.method},
                     {"dataset", report.dataset},   {"seed", report.seed},
                     {"subjects", subjects},        {"folds", folds},
                     {"overall", means_json(report.overall)}};
}

void from_json(const nlohmann::json& j, MetricsReport& report) {
  j.at("protocol").get_to(report.protocol);
  j.at("method").get_to(report.method);
  j.at("dataset").get_to(report.dataset);
  j.at("seed").get_to(report.seed);
  report.subjects.clear();
  for (const auto& s : j.at("subjects")) {
    SubjectScore score;
    s.at("subject_id").get_to(score.subject_id);
    s.at("fold").get_to(score.fold);
    s.at("tp").get_to(score.counts.tp);
    s.at("fp").get_to(score.counts.fp);
    s.at("tn").get_to(score.counts.tn);
    s.at("fn").get_to(score.counts.fn);
    score.dice = optional_from(s.at("dice"));
    score.sensitivity = optional_from(s.at("sensitivity"));
    score.specificity = optional_from(s.at("specificity"));
    report.subjects.push_back(score);
  }
  report.folds.clear();
  for (const auto& f : j.at("folds")) report.folds.push_back(means_from(f));
  report.overall = means_from(j.at("overall"));
}

void write_report(const MetricsReport& report, const std::filesystem::path& stem) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const auto json_path = std::filesystem::path(stem.string() + ".json");
  const auto text_path = std::filesystem::path(stem.string() + ".txt");
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write '" + json_path.string() + "'");
  js << nlohmann::json(report).dump(2) << '\n';
  std::ofstream txt(text_path);
  if (!txt) throw IoError("cannot write '" + text_path.string() + "'");
  txt << format_table(report);
}

}  // namespace cstrip
