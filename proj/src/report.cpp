#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

#include "srelu/experiments.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

auto record_key(const EvalRecord& r) {
  return std::make_tuple(std::cref(r.dataset), std::cref(r.model), std::cref(r.activation),
                         r.train_slope, r.test_slope, std::cref(r.attack), r.target_class.value_or(-1),
                         r.epsilon);
}

using GroupKey = std::tuple<std::string, std::string, std::string, double, double, std::string>;

GroupKey group_key(const EvalRecord& r) {
  return {r.dataset, r.model, r.activation, r.train_slope, r.test_slope, r.attack};
}

}  // namespace

void Report::append(const Report& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
  for (const auto& m : other.metadata) {
    if (std::find(metadata.begin(), metadata.end(), m) == metadata.end()) metadata.push_back(m);
  }
}

void normalize(Report& report) {
  auto& r = report.records;
  std::stable_sort(r.begin(), r.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return record_key(a) < record_key(b); });
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (record_key(r[i - 1]) == record_key(r[i])) {
      throw std::logic_error("duplicate report record for " + r[i].attack + " at slope " +
                             fmt(r[i].test_slope) + ", epsilon " + fmt(r[i].epsilon));
    }
  }
}

std::string report_csv(const Report& report) {
  std::string out = kReportHeader;
  out += '\n';
  for (const auto& r : report.records) {
    out += r.dataset + ',' + r.model + ',' + r.activation + ',' + fmt(r.train_slope) + ',' +
           fmt(r.test_slope) + ',' + r.attack + ',' + (r.targeted ? "1" : "0") + ',' +
           (r.target_class ? std::to_string(*r.target_class) : std::string()) + ',' +
           fmt(r.epsilon) + ',' + std::to_string(r.steps) + ',' + std::to_string(r.n_images) + ',' +
           fmt(r.clean_acc) + ',' + fmt(r.adv_acc) + ',' + fmt(r.attack_success) + ',' +
           std::to_string(r.seed) + '\n';
  }
  return out;
}

std::vector<SummaryRow> summarize(const Report& report) {
  struct Acc {
    std::size_t all = 0, nonzero = 0;
    double acc_all = 0, acc_nonzero = 0, succ_all = 0, succ_nonzero = 0;
  };
  std::map<GroupKey, Acc> groups;
  for (const auto& r : report.records) {
    auto& a = groups[group_key(r)];
    ++a.all;
    a.acc_all += r.adv_acc;
    a.succ_all += r.attack_success;
    if (r.epsilon != 0) {
      ++a.nonzero;
      a.acc_nonzero += r.adv_acc;
      a.succ_nonzero += r.attack_success;
    }
  }
  auto mean = [](double s, std::size_t n) { return n ? s / static_cast<double>(n) : 0.0; };
  std::vector<SummaryRow> rows;
  for (const auto& [key, a] : groups) {
    SummaryRow row;
    std::tie(row.dataset, row.model, row.activation, row.train_slope, row.test_slope, row.attack) = key;
    row.cells = a.all;
    row.mean_adv_acc = mean(a.acc_nonzero, a.nonzero);
    row.mean_adv_acc_with_eps0 = mean(a.acc_all, a.all);
    row.mean_attack_success = mean(a.succ_nonzero, a.nonzero);
    row.mean_attack_success_with_eps0 = mean(a.succ_all, a.all);
    rows.push_back(row);
  }
  for (auto& row : rows) {
    GroupKey base{row.dataset, row.model, row.activation, row.train_slope, 1.0, row.attack};
    auto it = groups.find(base);
    if (it == groups.end()) continue;
    const auto& b = it->second;
    row.recovery = row.mean_adv_acc - mean(b.acc_nonzero, b.nonzero);
    row.recovery_with_eps0 = row.mean_adv_acc_with_eps0 - mean(b.acc_all, b.all);
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "dataset,model,activation,train_slope,test_slope,attack,cells,mean_adv_acc,recovery,"
      "mean_attack_success,mean_adv_acc_with_eps0,recovery_with_eps0,mean_attack_success_with_eps0\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& r : rows) {
    out += r.dataset + ',' + r.model + ',' + r.activation + ',' + fmt(r.train_slope) + ',' +
           fmt(r.test_slope) + ',' + r.attack + ',' + std::to_string(r.cells) + ',' +
           fmt(r.mean_adv_acc) + ',' + opt(r.recovery) + ',' + fmt(r.mean_attack_success) + ',' +
           fmt(r.mean_adv_acc_with_eps0) + ',' + opt(r.recovery_with_eps0) + ',' +
           fmt(r.mean_attack_success_with_eps0) + '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

SRELU_NAMESPACE_END
