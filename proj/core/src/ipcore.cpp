// Copyright 2026 The blockrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "blockrecon/ipcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace blockrecon {

namespace {

using Exact = boost::multiprecision::cpp_rational;
using i128 = __int128;

// Arithmetic traits for the relaxation. Exact mode has zero tolerances and
// uses Bland's rule throughout (no cycling); float mode uses Dantzig pricing
// with tolerances, and every conclusion drawn from it is re-checked in
// integer arithmetic or guarded by a safety margin.
template <typename S>
struct LpTraits;

template <>
struct LpTraits<double> {
  static constexpr bool kExact = false;
  static double zero_tol() { return 1e-9; }
  static double infeas_margin() { return 1e-6; }
  static double from_int(int64_t v) { return static_cast<double>(v); }
  static double from_cost(double c) { return c; }
  static double to_double(double v) { return v; }
  static bool always_bland() { return false; }
};

template <>
struct LpTraits<Exact> {
  static constexpr bool kExact = true;
  static Exact zero_tol() { return Exact(0); }
  static Exact infeas_margin() { return Exact(0); }
  static Exact from_int(int64_t v) { return Exact(v); }
  static Exact from_cost(double c) { return Exact(c); }  // doubles are exact rationals
  static double to_double(const Exact& v) { return v.template convert_to<double>(); }
  static bool always_bland() { return true; }
};

enum class LpStatus { kOptimal, kInfeasible, kStall };

// Two-phase primal simplex with individual variable bounds, dense tableau.
// Column layout: structurals, then one slack per row, then artificials.
template <typename S>
class SimplexSolver {
 public:
  explicit SimplexSolver(const IntegerProgram& ip) : ip_(ip) {
    for (size_t i = 0; i < ip.constraints.size(); ++i) {
      if (!ip.constraints[i].lp_skip) rows_.push_back(static_cast<int>(i));
    }
    m_ = static_cast<int>(rows_.size());
    n_ = static_cast<int>(ip.num_vars());
  }

  // Solves the relaxation over the box [lo, hi]. use_objective toggles
  // phase 2. Returns the status; values() and objective() are valid only
  // for kOptimal.
  LpStatus run(std::span<const int64_t> lo, std::span<const int64_t> hi, bool use_objective) {
    build(lo, hi);
    // Phase 1: minimize total artificial mass.
    if (n_art_ > 0) {
      set_phase_costs(true);
      LpStatus st = iterate();
      if (st == LpStatus::kStall) return st;
      S infeas = phase1_value();
      if (infeas > LpTraits<S>::infeas_margin()) return LpStatus::kInfeasible;
      pin_artificials();
    }
    if (use_objective) {
      set_phase_costs(false);
      LpStatus st = iterate();
      if (st == LpStatus::kStall) return st;
    }
    extract();
    return LpStatus::kOptimal;
  }

  const std::vector<S>& values() const { return x_struct_; }

  S objective() const {
    S obj(0);
    for (int j = 0; j < n_; ++j) {
      if (!ip_.objective.empty()) obj += LpTraits<S>::from_cost(ip_.objective[j]) * x_struct_[j];
    }
    return obj;
  }

 private:
  void build(std::span<const int64_t> lo, std::span<const int64_t> hi) {
    ncols_ = n_ + m_;  // artificials appended below
    lower_.assign(ncols_, S(0));
    upper_.assign(ncols_, S(0));
    has_lower_.assign(ncols_, 1);
    has_upper_.assign(ncols_, 1);
    state_.assign(ncols_, kAtLower);
    for (int j = 0; j < n_; ++j) {
      lower_[j] = LpTraits<S>::from_int(lo[j]);
      upper_[j] = LpTraits<S>::from_int(hi[j]);
    }
    for (int i = 0; i < m_; ++i) {
      int col = n_ + i;
      switch (ip_.constraints[rows_[i]].sense) {
        case ConstraintSense::kLe:  // slack in [0, inf)
          has_upper_[col] = 0;
          break;
        case ConstraintSense::kGe:  // slack in (-inf, 0]
          has_lower_[col] = 0;
          state_[col] = kAtUpper;
          break;
        case ConstraintSense::kEq:  // slack fixed at zero
          break;
      }
    }

    // Row activity at the resting point (structurals at lower bound).
    std::vector<S> raw(m_, S(0));
    for (int i = 0; i < m_; ++i) {
      S act(0);
      for (const auto& [j, a] : ip_.constraints[rows_[i]].terms) {
        act += LpTraits<S>::from_int(a) * lower_[j];
      }
      raw[i] = LpTraits<S>::from_int(ip_.constraints[rows_[i]].rhs) - act;
    }

    // Decide per row: slack basic if the raw value fits its bounds,
    // otherwise clamp the slack to its nearest bound and open an artificial.
    basis_.assign(m_, -1);
    std::vector<int> art_sign(m_, 0);
    n_art_ = 0;
    for (int i = 0; i < m_; ++i) {
      int col = n_ + i;
      bool fits = (!has_lower_[col] || raw[i] >= lower_[col]) &&
                  (!has_upper_[col] || raw[i] <= upper_[col]);
      if (fits) {
        basis_[i] = col;
      } else {
        state_[col] = (has_upper_[col] && raw[i] > upper_[col]) ? kAtUpper : kAtLower;
        art_sign[i] = raw[i] > S(0) ? 1 : -1;
        ++n_art_;
      }
    }
    first_art_ = ncols_;
    ncols_ += n_art_;
    lower_.resize(ncols_, S(0));
    upper_.resize(ncols_, S(0));
    has_lower_.resize(ncols_, 1);
    has_upper_.resize(ncols_, 0);  // artificials in [0, inf) until pinned
    state_.resize(ncols_, kAtLower);

    // Dense tableau with the initial basis normalized to +1.
    tab_.assign(static_cast<size_t>(m_), std::vector<S>(ncols_, S(0)));
    beta_.assign(m_, S(0));
    int art = first_art_;
    for (int i = 0; i < m_; ++i) {
      S sgn = S(art_sign[i] < 0 ? -1 : 1);
      auto& row = tab_[i];
      for (const auto& [j, a] : ip_.constraints[rows_[i]].terms) {
        row[j] += sgn * LpTraits<S>::from_int(a);
      }
      row[n_ + i] = sgn;
      if (basis_[i] >= 0) {
        beta_[i] = raw[i];
      } else {
        row[art] = S(1);
        basis_[i] = art;
        state_[art] = kBasic;
        beta_[i] = art_sign[i] < 0 ? -raw[i] : raw[i];
        ++art;
      }
      state_[basis_[i]] = kBasic;
    }
  }

  void set_phase_costs(bool phase1) {
    cost_.assign(ncols_, S(0));
    if (phase1) {
      for (int j = first_art_; j < ncols_; ++j) cost_[j] = S(1);
    } else if (!ip_.objective.empty()) {
      for (int j = 0; j < n_; ++j) cost_[j] = LpTraits<S>::from_cost(ip_.objective[j]);
    }
    // Reduced cost row relative to the current basis.
    red_.assign(ncols_, S(0));
    for (int j = 0; j < ncols_; ++j) red_[j] = cost_[j];
    for (int i = 0; i < m_; ++i) {
      const S& cb = cost_[basis_[i]];
      if (cb == S(0)) continue;
      const auto& row = tab_[i];
      for (int j = 0; j < ncols_; ++j) red_[j] -= cb * row[j];
    }
  }

  S phase1_value() const {
    S v(0);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= first_art_) v += beta_[i];
    }
    return v;
  }

  // After phase 1, pivot artificials out where possible and pin them at zero.
  void pin_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < first_art_) continue;
      int enter = -1;
      for (int j = 0; j < first_art_; ++j) {
        if (state_[j] == kBasic) continue;
        if (abs_gt(tab_[i][j], LpTraits<S>::zero_tol())) {
          enter = j;
          break;
        }
      }
      if (enter >= 0) {
        // Degenerate pivot: the artificial is at zero, so no value moves.
        int leave = basis_[i];
        state_[enter] = kBasic;
        state_[leave] = kAtLower;
        basis_[i] = enter;
        S entering_value = state_value_resting(enter);
        pivot_rows(i, enter);
        beta_[i] = entering_value;  // step was zero
      }
    }
    for (int j = first_art_; j < ncols_; ++j) {
      upper_[j] = S(0);
      has_upper_[j] = 1;
    }
  }

  S state_value_resting(int col) const { return state_[col] == kAtUpper ? upper_[col] : lower_[col]; }

  static bool abs_gt(const S& v, const S& tol) { return v > tol || v < -tol; }

  LpStatus iterate() {
    const S tol = LpTraits<S>::zero_tol();
    bool bland = LpTraits<S>::always_bland();
    int degenerate_streak = 0;
    int64_t pivots = 0;
    const int64_t max_pivots = 4000 + 40LL * m_ + 2LL * ncols_;
    for (;;) {
      if (++pivots > max_pivots) return LpStatus::kStall;
      // Pricing.
      int enter = -1;
      S best(0);
      for (int j = 0; j < ncols_; ++j) {
        if (state_[j] == kBasic) continue;
        if (has_lower_[j] && has_upper_[j] && lower_[j] == upper_[j]) continue;  // fixed
        S d = red_[j];
        bool eligible = (state_[j] == kAtLower && d < -tol) || (state_[j] == kAtUpper && d > tol);
        if (!eligible) continue;
        if (bland) {
          enter = j;
          break;
        }
        S mag = d < S(0) ? -d : d;
        if (enter < 0 || mag > best) {
          best = mag;
          enter = j;
        }
      }
      if (enter < 0) return LpStatus::kOptimal;

      int dir = state_[enter] == kAtLower ? 1 : -1;

      // Ratio test: first across basic variables, then the entering
      // variable's own opposite bound.
      bool have_step = false;
      S step(0);
      int leave_row = -1;
      int leave_state = kAtLower;
      for (int i = 0; i < m_; ++i) {
        const S& t = tab_[i][enter];
        if (!abs_gt(t, tol)) continue;
        S delta = dir > 0 ? -t : t;  // basic value change per unit step
        int k = basis_[i];
        if (delta < S(0)) {
          if (!has_lower_[k]) continue;
          S lim = (beta_[i] - lower_[k]) / -delta;
          if (lim < S(0)) lim = S(0);
          if (!have_step || lim < step) {
            have_step = true;
            step = lim;
            leave_row = i;
            leave_state = kAtLower;
          }
        } else {
          if (!has_upper_[k]) continue;
          S lim = (upper_[k] - beta_[i]) / delta;
          if (lim < S(0)) lim = S(0);
          if (!have_step || lim < step) {
            have_step = true;
            step = lim;
            leave_row = i;
            leave_state = kAtUpper;
          }
        }
      }
      bool flip = false;
      if (has_lower_[enter] && has_upper_[enter]) {
        S range = upper_[enter] - lower_[enter];
        if (!have_step || range < step) {
          have_step = true;
          step = range;
          flip = true;
        }
      }
      if (!have_step) return LpStatus::kStall;  // relaxation should never be unbounded here

      if (step <= tol) {
        if (++degenerate_streak > 40) bland = true;
      } else {
        degenerate_streak = 0;
        if (!LpTraits<S>::always_bland()) bland = false;
      }

      // Apply the movement to the basic values.
      if (step > S(0)) {
        for (int i = 0; i < m_; ++i) {
          const S& t = tab_[i][enter];
          if (t == S(0)) continue;
          beta_[i] -= S(dir) * step * t;
        }
      }
      if (flip) {
        state_[enter] = state_[enter] == kAtLower ? kAtUpper : kAtLower;
        continue;
      }
      S entering_value = state_value_resting(enter) + S(dir) * step;
      int leave = basis_[leave_row];
      state_[leave] = leave_state;
      state_[enter] = kBasic;
      basis_[leave_row] = enter;
      pivot_rows(leave_row, enter);
      beta_[leave_row] = entering_value;
    }
  }

  // Row reduction so that column `enter` becomes the unit vector of `row`.
  void pivot_rows(int row, int enter) {
    auto& prow = tab_[row];
    S piv = prow[enter];
    if (piv != S(1)) {
      S inv = S(1) / piv;
      for (int j = 0; j < ncols_; ++j) prow[j] *= inv;
    }
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      S f = tab_[i][enter];
      if (f == S(0)) continue;
      auto& r = tab_[i];
      for (int j = 0; j < ncols_; ++j) r[j] -= f * prow[j];
    }
    S fc = red_[enter];
    if (fc != S(0)) {
      for (int j = 0; j < ncols_; ++j) red_[j] -= fc * prow[j];
    }
  }

  void extract() {
    x_struct_.assign(n_, S(0));
    for (int j = 0; j < n_; ++j) {
      if (state_[j] != kBasic) x_struct_[j] = state_value_resting(j);
    }
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) x_struct_[basis_[i]] = beta_[i];
    }
  }

  static constexpr int kAtLower = 0;
  static constexpr int kAtUpper = 1;
  static constexpr int kBasic = 2;

  const IntegerProgram& ip_;
  std::vector<int> rows_;  // constraint indices that participate in the relaxation
  int m_ = 0;
  int n_ = 0;
  int ncols_ = 0;
  int n_art_ = 0;
  int first_art_ = 0;
  std::vector<std::vector<S>> tab_;
  std::vector<S> beta_;
  std::vector<S> lower_, upper_, cost_, red_;
  std::vector<uint8_t> has_lower_, has_upper_;
  std::vector<int> basis_;
  std::vector<int> state_;
  std::vector<S> x_struct_;
};

int64_t floor_div(i128 p, i128 q) {
  i128 d = p / q;
  if ((p % q != 0) && ((p < 0) != (q < 0))) --d;
  return static_cast<int64_t>(d);
}

int64_t ceil_div(i128 p, i128 q) {
  i128 d = p / q;
  if ((p % q != 0) && ((p < 0) == (q < 0))) ++d;
  return static_cast<int64_t>(d);
}

// Depth-first branch and bound over the count-vector box.
template <typename S>
class BranchAndBound {
 public:
  BranchAndBound(const IntegerProgram& ip, const SolveLimits& limits)
      : ip_(ip), limits_(limits), lp_(ip) {
    n_ = static_cast<int>(ip.num_vars());
    lo_.assign(n_, 0);
    hi_ = ip.upper;
    // Normalize constraints to <= form once, for exact propagation.
    for (const auto& c : ip.constraints) {
      if (c.sense != ConstraintSense::kGe) le_.push_back({c.terms, c.rhs});
      if (c.sense != ConstraintSense::kLe) {
        LeRow r;
        r.rhs = -c.rhs;
        for (const auto& [j, a] : c.terms) r.terms.emplace_back(j, -a);
        le_.push_back(std::move(r));
      }
    }
  }

  Solution run() {
    feasibility_ = !ip_.has_objective();
    dfs(0);
    Solution s;
    s.nodes = nodes_;
    if (limit_hit_) {
      s.status = SolveStatus::kBoundReached;
      if (have_incumbent_) {
        s.counts = incumbent_;
        s.objective = ip_.objective_value(incumbent_);
      }
      return s;
    }
    if (!have_incumbent_) {
      s.status = SolveStatus::kInfeasible;
      return s;
    }
    s.status = feasibility_ ? SolveStatus::kFeasible : SolveStatus::kOptimal;
    s.counts = incumbent_;
    s.objective = feasibility_ ? 0.0 : ip_.objective_value(incumbent_);
    return s;
  }

 private:
  struct LeRow {
    std::vector<std::pair<int32_t, int64_t>> terms;
    int64_t rhs = 0;
  };

  bool stop() const { return abort_ || limit_hit_; }

  void dfs(int depth) {
    if (stop()) return;
    if (++nodes_ > limits_.max_nodes || depth > 4000) {
      limit_hit_ = true;
      return;
    }
    std::vector<int64_t> saved_lo = lo_;
    std::vector<int64_t> saved_hi = hi_;
    process(depth);
    lo_ = std::move(saved_lo);
    hi_ = std::move(saved_hi);
  }

  void process(int depth) {
    if (!propagate()) return;

    int unfixed = -1;
    for (int j = 0; j < n_; ++j) {
      if (lo_[j] < hi_[j]) {
        unfixed = j;
        break;
      }
    }
    if (unfixed < 0) {
      if (ip_.satisfies(lo_) && !ip_.is_excluded(lo_)) candidate(lo_);
      return;
    }

    // Cheap box bound before paying for a relaxation solve (float mode: the
    // exact path proves optimality through exact relaxation bounds only).
    if constexpr (!LpTraits<S>::kExact) {
      if (!feasibility_ && have_incumbent_ && !keeps_hope(box_objective_bound())) return;
    }

    LpStatus st = lp_.run(lo_, hi_, !feasibility_);
    if (st == LpStatus::kInfeasible) return;  // margin-guarded proof
    if (st == LpStatus::kStall) {
      branch_split(depth, unfixed, (lo_[unfixed] + hi_[unfixed]) / 2);
      return;
    }

    if (!feasibility_ && have_incumbent_) {
      if constexpr (LpTraits<S>::kExact) {
        if (lp_.objective() >= incumbent_exact_) return;
      } else {
        if (!keeps_hope(LpTraits<S>::to_double(lp_.objective()))) return;
      }
    }

    // Integrality of the relaxation solution.
    const auto& xv = lp_.values();
    int frac_var = -1;
    double frac_best = -1.0;
    std::vector<int64_t> rounded(n_);
    for (int j = 0; j < n_; ++j) {
      double v = LpTraits<S>::to_double(xv[j]);
      double r = std::nearbyint(v);
      double f = std::abs(v - r);
      rounded[j] = std::clamp<int64_t>(static_cast<int64_t>(r), lo_[j], hi_[j]);
      if (f > 1e-6 && f > frac_best && lo_[j] < hi_[j]) {
        frac_best = f;
        frac_var = j;
      }
    }
    if (frac_var < 0) {
      if (ip_.satisfies(rounded)) {
        if (!ip_.is_excluded(rounded)) {
          candidate(rounded);
          if (feasibility_) return;
          // The relaxation bound is attained by this point, so the subtree
          // holds nothing strictly better; equal-cost alternates are only
          // needed by the enumeration layer, which re-solves with cuts.
          return;
        }
        // Split around the excluded prefix; when it is fully pinned, every
        // completion in this box is excluded too.
        int ex_var = -1;
        for (int j = 0; j < static_cast<int>(ip_.arity()); ++j) {
          if (lo_[j] < hi_[j]) {
            ex_var = j;
            break;
          }
        }
        if (ex_var < 0) return;
        branch_around(depth, rounded, ex_var);
        return;
      }
      // The float relaxation lied about integrality; split and carry on.
      branch_split(depth, unfixed, (lo_[unfixed] + hi_[unfixed]) / 2);
      return;
    }
    double v = LpTraits<S>::to_double(xv[frac_var]);
    branch_split(depth, frac_var, static_cast<int64_t>(std::floor(v)));
  }

  // Float-mode bound test against the incumbent. Subtrees whose bound ties
  // the incumbent (within a relative epsilon) are cut: one optimum is
  // enough, and alternates come back through exclusion cuts when the
  // enumeration layer wants them. The epsilon is the documented optimality
  // tolerance of the float path.
  bool keeps_hope(double bound) const {
    double slack = 1e-9 * (1.0 + std::abs(incumbent_obj_));
    return bound < incumbent_obj_ - slack;
  }

  // Minimal possible objective over the current box, from the bounds alone.
  double box_objective_bound() const {
    double v = 0.0;
    for (int j = 0; j < n_; ++j) {
      double c = ip_.objective[j];
      if (c > 0.0) {
        v += c * static_cast<double>(lo_[j]);
      } else if (c < 0.0) {
        v += c * static_cast<double>(hi_[j]);
      }
    }
    return v;
  }

  void candidate(const std::vector<int64_t>& x) {
    if (feasibility_) {
      incumbent_ = x;
      have_incumbent_ = true;
      abort_ = true;
      return;
    }
    double obj = ip_.objective_value(x);
    if constexpr (LpTraits<S>::kExact) {
      Exact e(0);
      for (int j = 0; j < n_; ++j) e += Exact(ip_.objective[j]) * x[j];
      if (!have_incumbent_ || e < incumbent_exact_) {
        incumbent_ = x;
        incumbent_exact_ = e;
        incumbent_obj_ = obj;
        have_incumbent_ = true;
      }
    } else {
      if (!have_incumbent_ || obj < incumbent_obj_ - 1e-12) {
        incumbent_ = x;
        incumbent_obj_ = obj;
        have_incumbent_ = true;
      }
    }
  }

  // Children explored value-descending: the >= ceil side first.
  void branch_split(int depth, int var, int64_t floor_val) {
    floor_val = std::clamp(floor_val, lo_[var], hi_[var] - 1);
    int64_t keep_lo = lo_[var], keep_hi = hi_[var];
    lo_[var] = floor_val + 1;
    dfs(depth + 1);
    lo_[var] = keep_lo;
    if (stop()) return;
    hi_[var] = floor_val;
    dfs(depth + 1);
    hi_[var] = keep_hi;
  }

  // The relaxation landed exactly on an excluded vector: split the box
  // around it so every other integer point stays reachable.
  void branch_around(int depth, const std::vector<int64_t>& v, int var) {
    int64_t keep_lo = lo_[var], keep_hi = hi_[var];
    if (v[var] + 1 <= hi_[var]) {
      lo_[var] = v[var] + 1;
      dfs(depth + 1);
      lo_[var] = keep_lo;
      if (stop()) return;
    }
    if (v[var] - 1 >= lo_[var]) {
      hi_[var] = v[var] - 1;
      dfs(depth + 1);
      hi_[var] = keep_hi;
      if (stop()) return;
    }
    lo_[var] = v[var];
    hi_[var] = v[var];
    dfs(depth + 1);
    lo_[var] = keep_lo;
    hi_[var] = keep_hi;
  }

  // Integer bounds consistency over the <=-normalized rows.
  bool propagate() {
    for (int round = 0; round < 16; ++round) {
      bool changed = false;
      for (const auto& row : le_) {
        i128 min_sum = 0;
        for (const auto& [j, a] : row.terms) {
          min_sum += static_cast<i128>(a) * (a > 0 ? lo_[j] : hi_[j]);
        }
        if (min_sum > row.rhs) return false;
        for (const auto& [j, a] : row.terms) {
          i128 own_min = static_cast<i128>(a) * (a > 0 ? lo_[j] : hi_[j]);
          i128 slack = static_cast<i128>(row.rhs) - (min_sum - own_min);
          if (a > 0) {
            int64_t nb = floor_div(slack, a);
            if (nb < hi_[j]) {
              if (nb < lo_[j]) return false;
              hi_[j] = nb;
              changed = true;
            }
          } else {
            int64_t nb = ceil_div(slack, a);
            if (nb > lo_[j]) {
              if (nb > hi_[j]) return false;
              lo_[j] = nb;
              changed = true;
            }
          }
        }
      }
      if (!changed) return true;
    }
    return true;
  }

  const IntegerProgram& ip_;
  SolveLimits limits_;
  SimplexSolver<S> lp_;
  int n_ = 0;
  std::vector<int64_t> lo_, hi_;
  std::vector<LeRow> le_;
  int64_t nodes_ = 0;
  bool feasibility_ = false;
  bool abort_ = false;
  bool limit_hit_ = false;
  bool have_incumbent_ = false;
  std::vector<int64_t> incumbent_;
  double incumbent_obj_ = std::numeric_limits<double>::infinity();
  Exact incumbent_exact_;
};

bool use_exact(const IntegerProgram& ip, const SolveLimits& limits) {
  switch (limits.arithmetic) {
    case Arithmetic::kExact: return true;
    case Arithmetic::kFloat: return false;
    default: return ip.num_vars() <= 64;
  }
}

}  // namespace

ConfigurationSpace::ConfigurationSpace(std::vector<HouseholdRecord> configs)
    : configs_(std::move(configs)) {
  for (const auto& c : configs_) c.validate();
  std::sort(configs_.begin(), configs_.end());
  auto dup = std::adjacent_find(configs_.begin(), configs_.end());
  if (dup != configs_.end()) {
    throw std::invalid_argument("ConfigurationSpace: configurations must be distinct");
  }
}

std::optional<size_t> ConfigurationSpace::find(const HouseholdRecord& c) const {
  auto it = std::lower_bound(configs_.begin(), configs_.end(), c);
  if (it == configs_.end() || !(*it == c)) return std::nullopt;
  return static_cast<size_t>(it - configs_.begin());
}

bool IntegerProgram::satisfies(std::span<const int64_t> x) const {
  if (x.size() != num_vars()) return false;
  for (size_t j = 0; j < x.size(); ++j) {
    if (x[j] < 0 || x[j] > upper[j]) return false;
  }
  for (const auto& c : constraints) {
    i128 v = 0;
    for (const auto& [j, a] : c.terms) v += static_cast<i128>(a) * x[j];
    switch (c.sense) {
      case ConstraintSense::kLe:
        if (v > c.rhs) return false;
        break;
      case ConstraintSense::kGe:
        if (v < c.rhs) return false;
        break;
      case ConstraintSense::kEq:
        if (v != c.rhs) return false;
        break;
    }
  }
  return true;
}

bool IntegerProgram::is_excluded(std::span<const int64_t> x) const {
  const size_t n = arity();
  if (x.size() < n) return false;
  for (const auto& e : exclusions) {
    if (e.size() == n && std::equal(e.begin(), e.end(), x.begin())) return true;
  }
  return false;
}

double IntegerProgram::objective_value(std::span<const int64_t> x) const {
  double v = 0.0;
  for (size_t j = 0; j < objective.size() && j < x.size(); ++j) {
    v += objective[j] * static_cast<double>(x[j]);
  }
  return v;
}

void IntegerProgram::validate() const {
  for (int64_t u : upper) {
    if (u < 0) throw std::invalid_argument("IntegerProgram: negative upper bound");
  }
  if (!objective.empty() && objective.size() != num_vars()) {
    throw std::invalid_argument("IntegerProgram: objective length mismatch");
  }
  for (const auto& c : constraints) {
    for (const auto& [j, a] : c.terms) {
      if (j < 0 || static_cast<size_t>(j) >= num_vars()) {
        throw std::invalid_argument("IntegerProgram: constraint references unknown variable");
      }
      (void)a;
    }
  }
  if (exclusion_arity > num_vars()) {
    throw std::invalid_argument("IntegerProgram: exclusion arity exceeds variable count");
  }
  for (const auto& e : exclusions) {
    if (e.size() != arity()) {
      throw std::invalid_argument("IntegerProgram: exclusion vector length mismatch");
    }
  }
}

Solution solve(const IntegerProgram& ip, const SolveLimits& limits) {
  ip.validate();
  if (use_exact(ip, limits)) {
    return BranchAndBound<Exact>(ip, limits).run();
  }
  return BranchAndBound<double>(ip, limits).run();
}

TopSolutions enumerate_top(const IntegerProgram& ip, int t, const SolveLimits& limits) {
  if (!ip.has_objective()) {
    throw std::invalid_argument("enumerate_top: the program needs an objective");
  }
  TopSolutions out;
  IntegerProgram work = ip;
  for (int k = 0; k < t; ++k) {
    SolveLimits step = limits;
    if (limits.max_total_nodes > 0) {
      int64_t remaining = limits.max_total_nodes - out.nodes;
      if (remaining <= 0) {
        out.truncated = true;
        break;
      }
      step.max_nodes = std::min(step.max_nodes, remaining);
    }
    Solution s = solve(work, step);
    out.nodes += s.nodes;
    if (s.status == SolveStatus::kOptimal) {
      work.exclusions.emplace_back(s.counts.begin(),
                                   s.counts.begin() + static_cast<ptrdiff_t>(work.arity()));
      out.solutions.push_back(std::move(s));
    } else if (s.status == SolveStatus::kInfeasible) {
      break;  // the feasible set is exhausted
    } else {
      // A truncated solve may still carry an unproven incumbent; keep it,
      // flagged by its status, and stop.
      if (!s.counts.empty()) out.solutions.push_back(std::move(s));
      out.truncated = true;
      break;
    }
  }
  return out;
}

namespace {

// Mass-conserving case: max L1 = 2 (mass - min overlap), where the overlap
// with the reference is sum_c min(n_c, r_c). One selector per populated
// reference cell chooses which side of the min binds.
L1Result maximize_l1_conserved(const IntegerProgram& ip, const L1Objective& objective,
                               const SolveLimits& limits,
                               const std::vector<std::vector<int32_t>>& members,
                               const std::vector<int64_t>& cell_cap) {
  const int n_cells = static_cast<int>(objective.reference.size());
  const int64_t mass = *objective.conserved_mass;
  int64_t ref_mass = 0;
  for (int64_t r : objective.reference) ref_mass += r;
  if (ref_mass != mass) {
    throw std::invalid_argument("maximize_l1: reference mass disagrees with the conserved mass");
  }

  IntegerProgram ext;
  ext.upper = ip.upper;
  ext.constraints = ip.constraints;
  ext.objective.assign(ip.num_vars(), 0.0);

  for (int c = 0; c < n_cells; ++c) {
    const int64_t r = objective.reference[c];
    if (r <= 0 || members[c].empty()) continue;  // zero overlap regardless
    int overlap = static_cast<int>(ext.upper.size());
    ext.upper.push_back(r);
    ext.objective.push_back(1.0);  // minimize total overlap
    const int64_t big = std::max<int64_t>(0, cell_cap[c] - r);
    if (big > 0) {
      int side = static_cast<int>(ext.upper.size());
      ext.upper.push_back(1);
      ext.objective.push_back(0.0);
      // side = 0: overlap >= cell mass (binds when mass <= r);
      // side = 1: overlap >= r (the cell holds at least the reference mass).
      LinearConstraint lo_n;
      lo_n.label = "overlap_n_" + std::to_string(c);
      lo_n.sense = ConstraintSense::kGe;
      lo_n.rhs = 0;
      lo_n.terms.emplace_back(overlap, 1);
      for (int32_t j : members[c]) lo_n.terms.emplace_back(j, -1);
      lo_n.terms.emplace_back(side, big);
      ext.constraints.push_back(std::move(lo_n));
      LinearConstraint lo_r;
      lo_r.label = "overlap_r_" + std::to_string(c);
      lo_r.sense = ConstraintSense::kGe;
      lo_r.rhs = 0;
      lo_r.terms.emplace_back(overlap, 1);
      lo_r.terms.emplace_back(side, -r);
      ext.constraints.push_back(std::move(lo_r));
    } else {
      // The cell can never exceed the reference: overlap is the cell mass.
      LinearConstraint lo_n;
      lo_n.label = "overlap_n_" + std::to_string(c);
      lo_n.sense = ConstraintSense::kGe;
      lo_n.rhs = 0;
      lo_n.terms.emplace_back(overlap, 1);
      for (int32_t j : members[c]) lo_n.terms.emplace_back(j, -1);
      ext.constraints.push_back(std::move(lo_n));
    }
  }

  Solution s = solve(ext, limits);
  L1Result out;
  out.nodes = s.nodes;
  if (s.status == SolveStatus::kInfeasible) {
    throw std::invalid_argument("maximize_l1: the program is infeasible; the reference was not");
  }
  if (s.counts.empty()) {
    out.value = 0;
    out.exact = false;
    return out;
  }
  int64_t overlap = 0;
  for (int c = 0; c < n_cells; ++c) {
    if (objective.reference[c] <= 0 || members[c].empty()) continue;
    int64_t cell_mass = 0;
    for (int32_t j : members[c]) cell_mass += s.counts[j];
    overlap += std::min(cell_mass, objective.reference[c]);
  }
  out.value = 2 * (mass - overlap);
  out.exact = s.status == SolveStatus::kOptimal;
  return out;
}

}  // namespace

L1Result maximize_l1(const IntegerProgram& ip, const L1Objective& objective,
                     const SolveLimits& limits) {
  if (!ip.exclusions.empty()) {
    throw std::invalid_argument("maximize_l1: exclusion cuts are not supported here");
  }
  if (objective.cell_of.size() != ip.num_vars()) {
    throw std::invalid_argument("maximize_l1: cell map length mismatch");
  }
  const int n = static_cast<int>(ip.num_vars());
  const int n_cells = static_cast<int>(objective.reference.size());

  // Per-cell reachable mass bound and membership.
  std::vector<int64_t> cell_cap(n_cells, 0);
  std::vector<std::vector<int32_t>> members(n_cells);
  for (int j = 0; j < n; ++j) {
    int32_t c = objective.cell_of[j];
    if (c < 0) continue;
    if (c >= n_cells) throw std::invalid_argument("maximize_l1: cell index out of range");
    cell_cap[c] += ip.upper[j];
    members[c].push_back(j);
  }

  if (objective.conserved_mass.has_value()) {
    return maximize_l1_conserved(ip, objective, limits, members, cell_cap);
  }

  IntegerProgram ext;
  ext.upper = ip.upper;
  ext.constraints = ip.constraints;
  ext.objective.assign(ip.num_vars(), 0.0);

  // Cells no variable can reach contribute |0 - r| regardless of the
  // solution; fold them into a constant.
  int64_t base = 0;
  for (int c = 0; c < n_cells; ++c) {
    const int64_t r = objective.reference[c];
    if (members[c].empty()) {
      base += r;
      continue;
    }
    const int64_t up = std::max(r, cell_cap[c] - r);  // max |delta|
    if (up == 0) continue;                            // mass pinned to the reference
    int dvar = static_cast<int>(ext.upper.size());
    ext.upper.push_back(up);
    ext.objective.push_back(-1.0);  // maximize sum of deviations

    // d <= (sum - r) + 2 r z   and   d <= (r - sum) + 2 (cap - r) (1 - z).
    // z picks the active side; with z integral, d maxes out at |sum - r|.
    if (r > 0 && cell_cap[c] - r > 0) {
      int zvar = static_cast<int>(ext.upper.size());
      ext.upper.push_back(1);
      ext.objective.push_back(0.0);
      LinearConstraint pos;
      pos.label = "l1_pos_" + std::to_string(c);
      pos.sense = ConstraintSense::kLe;
      pos.rhs = -r;
      pos.terms.emplace_back(dvar, 1);
      for (int32_t j : members[c]) pos.terms.emplace_back(j, -1);
      pos.terms.emplace_back(zvar, -2 * r);
      ext.constraints.push_back(std::move(pos));
      LinearConstraint neg;
      neg.label = "l1_neg_" + std::to_string(c);
      neg.sense = ConstraintSense::kLe;
      neg.rhs = r + 2 * (cell_cap[c] - r);
      neg.terms.emplace_back(dvar, 1);
      for (int32_t j : members[c]) neg.terms.emplace_back(j, 1);
      neg.terms.emplace_back(zvar, 2 * (cell_cap[c] - r));
      ext.constraints.push_back(std::move(neg));
    } else if (r == 0) {  // deviation can only be positive
      LinearConstraint pos;
      pos.label = "l1_pos_" + std::to_string(c);
      pos.sense = ConstraintSense::kLe;
      pos.rhs = 0;
      pos.terms.emplace_back(dvar, 1);
      for (int32_t j : members[c]) pos.terms.emplace_back(j, -1);
      ext.constraints.push_back(std::move(pos));
    } else {  // cap == r: deviation can only be negative
      LinearConstraint neg;
      neg.label = "l1_neg_" + std::to_string(c);
      neg.sense = ConstraintSense::kLe;
      neg.rhs = r;
      neg.terms.emplace_back(dvar, 1);
      for (int32_t j : members[c]) neg.terms.emplace_back(j, 1);
      ext.constraints.push_back(std::move(neg));
    }
  }

  Solution s = solve(ext, limits);
  L1Result out;
  out.nodes = s.nodes;
  if (s.status == SolveStatus::kInfeasible) {
    throw std::invalid_argument("maximize_l1: the program is infeasible; the reference was not");
  }
  if (s.counts.empty()) {  // limits hit before any incumbent
    out.value = base;
    out.exact = false;
    return out;
  }
  // Recompute the distance from the counts in integer arithmetic; the
  // objective only guided the search.
  int64_t value = base;
  for (int c = 0; c < n_cells; ++c) {
    if (members[c].empty()) continue;
    int64_t mass = 0;
    for (int32_t j : members[c]) mass += s.counts[j];
    value += std::llabs(mass - objective.reference[c]);
  }
  out.value = value;
  out.exact = s.status == SolveStatus::kOptimal;
  return out;
}

void write_lp(const IntegerProgram& ip, std::ostream& out) {
  out << "\\ blockrecon count-vector model\n";
  out << (ip.has_objective() ? "Minimize\n obj:" : "Minimize\n obj: 0 x0");
  if (ip.has_objective()) {
    for (size_t j = 0; j < ip.objective.size(); ++j) {
      if (ip.objective[j] == 0.0) continue;
      out << (ip.objective[j] >= 0 ? " + " : " - ") << std::abs(ip.objective[j]) << " x" << j;
    }
  }
  out << "\nSubject To\n";
  for (size_t i = 0; i < ip.constraints.size(); ++i) {
    const auto& c = ip.constraints[i];
    out << " c" << i << ":";
    for (const auto& [j, a] : c.terms) {
      out << (a >= 0 ? " + " : " - ") << std::llabs(a) << " x" << j;
    }
    switch (c.sense) {
      case ConstraintSense::kLe: out << " <= "; break;
      case ConstraintSense::kGe: out << " >= "; break;
      case ConstraintSense::kEq: out << " = "; break;
    }
    out << c.rhs;
    if (!c.label.empty()) out << " \\ " << c.label;
    out << "\n";
  }
  out << "Bounds\n";
  for (size_t j = 0; j < ip.num_vars(); ++j) {
    out << " 0 <= x" << j << " <= " << ip.upper[j] << "\n";
  }
  out << "General\n";
  for (size_t j = 0; j < ip.num_vars(); ++j) out << " x" << j;
  out << "\nEnd\n";
}

}  // namespace blockrecon
