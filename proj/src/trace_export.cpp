#include "mveq/trace_export.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace mveq {

namespace {

using Cell = std::optional<double>;

std::string full_precision(double v) { return fmt::format("{:.17g}", v); }

class Table {
 public:
  explicit Table(std::size_t rows) : rows_(rows) {}

  void scalar(const std::string& name, const std::vector<double>& values) {
    std::vector<Cell> col(rows_);
    for (std::size_t k = 0; k < rows_ && k < values.size(); ++k) {
      if (std::isfinite(values[k])) col[k] = values[k];
    }
    add(name, std::move(col));
  }

  void flag(const std::string& name, const std::vector<bool>& values) {
    std::vector<Cell> col(rows_);
    for (std::size_t k = 0; k < rows_ && k < values.size(); ++k) {
      col[k] = values[k] ? 1.0 : 0.0;
    }
    add(name, std::move(col));
  }

  template <typename Vec>
  void vectors(const std::string& name, const std::vector<Vec>& values) {
    const Eigen::Index m = width(values);
    for (Eigen::Index i = 0; i < m; ++i) {
      std::vector<Cell> col(rows_);
      for (std::size_t k = 0; k < rows_ && k < values.size(); ++k) {
        if (values[k].size() == m) col[k] = values[k](i);
      }
      add(fmt::format("{}_{}", name, i + 1), std::move(col));
    }
  }

  void matrices(const std::string& name, const std::vector<Eigen::MatrixXd>& values) {
    Eigen::Index m = 0;
    for (const auto& v : values) m = std::max(m, v.rows());
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        std::vector<Cell> col(rows_);
        for (std::size_t k = 0; k < rows_ && k < values.size(); ++k) {
          if (values[k].rows() == m) col[k] = values[k](i, j);
        }
        add(fmt::format("{}_{}{}", name, i + 1, j + 1), std::move(col));
      }
    }
  }

  void write_csv(std::ostream& out) const {
    out << "stage";
    for (const auto& h : headers_) out << ',' << h;
    out << '\n';
    for (std::size_t k = 0; k < rows_; ++k) {
      out << k;
      for (const auto& col : columns_) {
        out << ',';
        if (col[k]) out << full_precision(*col[k]);
      }
      out << '\n';
    }
  }

  nlohmann::json to_json() const {
    auto rows = nlohmann::json::array();
    for (std::size_t k = 0; k < rows_; ++k) {
      nlohmann::json row;
      row["stage"] = k;
      for (std::size_t c = 0; c < headers_.size(); ++c) {
        row[headers_[c]] = columns_[c][k] ? nlohmann::json(*columns_[c][k])
                                          : nlohmann::json(nullptr);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

 private:
  template <typename Vec>
  static Eigen::Index width(const std::vector<Vec>& values) {
    Eigen::Index m = 0;
    for (const auto& v : values) m = std::max(m, v.size());
    return m;
  }

  void add(std::string name, std::vector<Cell> col) {
    headers_.push_back(std::move(name));
    columns_.push_back(std::move(col));
  }

  std::size_t rows_;
  std::vector<std::string> headers_;
  std::vector<std::vector<Cell>> columns_;
};

Table make_table(const OpenLoopTrace& tr) {
  Table t(tr.st_sum.size());
  t.scalar("st_sum", tr.st_sum);
  t.scalar("s_hat", tr.s_hat);
  t.scalar("u_hat", tr.u_hat);
  t.scalar("pi_hat", tr.pi_hat);
  t.flag("range_ok", tr.range_ok);
  t.scalar("range_residual", tr.range_residual);
  t.vectors("l_hat", tr.l_hat);
  t.vectors("theta_hat", tr.theta_hat);
  t.matrices("o_hat", tr.o_hat);
  return t;
}

Table make_table(const FeedbackTrace& tr) {
  Table t(tr.s_tilde.size());
  t.scalar("s_tilde", tr.s_tilde);
  t.scalar("scal_tilde", tr.scal_tilde);
  t.scalar("u_tilde", tr.u_tilde);
  t.scalar("pi_tilde", tr.pi_tilde);
  t.scalar("closed_loop", tr.closed_loop);
  t.flag("solvable", tr.solvable);
  t.scalar("residual_l", tr.residual_l);
  t.scalar("residual_theta", tr.residual_theta);
  t.vectors("beta_tilde", tr.beta_tilde);
  t.vectors("l_tilde", tr.l_tilde);
  t.vectors("theta_tilde", tr.theta_tilde);
  t.matrices("o_tilde", tr.o_tilde);
  return t;
}

Table make_table(const MixedTrace& tr) {
  Table t(tr.s.size());
  t.scalar("s", tr.s);
  t.scalar("scal", tr.scal);
  t.scalar("t", tr.t);
  t.scalar("tcal", tr.tcal);
  t.scalar("u", tr.u);
  t.scalar("pi", tr.pi);
  t.flag("solvable", tr.solvable);
  t.flag("s_level_psd", tr.s_level_psd);
  t.scalar("residual_l", tr.residual_l);
  t.scalar("residual_theta", tr.residual_theta);
  t.vectors("o_eig", tr.o_eigs);
  t.vectors("beta", tr.beta);
  t.vectors("l", tr.l_mix);
  t.vectors("theta", tr.theta_mix);
  t.matrices("o", tr.o_mix);
  return t;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

void write_policy_csv(std::ostream& out, const AffinePolicy& policy) {
  const int m = policy.num_assets();
  out << "stage";
  for (int i = 1; i <= m; ++i) out << ",K_" << i;
  for (int i = 1; i <= m; ++i) out << ",c_" << i;
  out << '\n';
  for (int k = policy.start_stage(); k < policy.end_stage(); ++k) {
    out << k;
    for (int i = 0; i < m; ++i) out << ',' << full_precision(policy.gain(k)[i]);
    for (int i = 0; i < m; ++i) out << ',' << full_precision(policy.offset(k)[i]);
    out << '\n';
  }
}

std::string format_policy_table(const AffinePolicy& policy, int decimals) {
  const int m = policy.num_assets();
  const int width = decimals + 5;
  std::ostringstream out;
  out << fmt::format("{:>5}", "k");
  for (int i = 1; i <= m; ++i) out << fmt::format(" {:>{}}", fmt::format("K_{}", i), width);
  for (int i = 1; i <= m; ++i) out << fmt::format(" {:>{}}", fmt::format("c_{}", i), width);
  out << '\n';
  for (int k = policy.start_stage(); k < policy.end_stage(); ++k) {
    out << fmt::format("{:>5}", k);
    for (int i = 0; i < m; ++i) {
      out << fmt::format(" {:>{}.{}f}", policy.gain(k)[i], width, decimals);
    }
    for (int i = 0; i < m; ++i) {
      out << fmt::format(" {:>{}.{}f}", policy.offset(k)[i], width, decimals);
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json policy_to_json(const AffinePolicy& policy) {
  nlohmann::json j;
  j["kind"] = to_string(policy.kind());
  j["start_stage"] = policy.start_stage();
  auto stages = nlohmann::json::array();
  for (int k = policy.start_stage(); k < policy.end_stage(); ++k) {
    nlohmann::json row;
    row["stage"] = k;
    row["K"] = vector_json(policy.gain(k));
    row["c"] = vector_json(policy.offset(k));
    if (policy.has_feedback_part()) row["phi"] = vector_json(policy.feedback_gain(k));
    stages.push_back(std::move(row));
  }
  j["stages"] = std::move(stages);
  return j;
}

void write_trace_csv(std::ostream& out, const OpenLoopTrace& trace) {
  make_table(trace).write_csv(out);
}
void write_trace_csv(std::ostream& out, const FeedbackTrace& trace) {
  make_table(trace).write_csv(out);
}
void write_trace_csv(std::ostream& out, const MixedTrace& trace) {
  make_table(trace).write_csv(out);
}

nlohmann::json trace_to_json(const OpenLoopTrace& trace) {
  return make_table(trace).to_json();
}
nlohmann::json trace_to_json(const FeedbackTrace& trace) {
  return make_table(trace).to_json();
}
nlohmann::json trace_to_json(const MixedTrace& trace) {
  return make_table(trace).to_json();
}

}  // namespace mveq
