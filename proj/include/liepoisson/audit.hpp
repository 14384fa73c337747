#pragma once

// Term-by-term audit of the expanded systems. The canonical coefficients
// produced by compile() are compared against a literal evaluation of the
// expanded coefficient formulas, irregularities included. Divergence is
// reported per term group with the worst sample attached, never silently
// adopted. Sub-terms that cannot be evaluated as written (undefined symbols,
// unsaturated indices) are excluded and noted on the record.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "liepoisson/algebroid.hpp"
#include "liepoisson/connection.hpp"
#include "liepoisson/geometry.hpp"
#include "liepoisson/poisson.hpp"
#include "liepoisson/polynomial.hpp"
#include "liepoisson/rng.hpp"
#include "liepoisson/sde.hpp"

namespace liepoisson {

struct AuditRecord {
  std::string line;   // coordinate family: "dx", "dp", "dxi", "dmu", ...
  std::string group;  // "h-coupling", "correction", "diffusion[s]"
  std::string term;   // literal expression as transcribed
  double canonical = 0.0;  // value at the worst sample
  double literal = 0.0;
  double delta = 0.0;  // max |canonical - literal| over samples and components
  bool flagged = false;
  std::string note;
};

struct AuditReport {
  std::string equation;
  int n_samples = 0;
  std::vector<AuditRecord> records;
  std::vector<std::string> notes;

  bool clean() const {
    for (const auto& r : records) {
      if (r.flagged) return false;
    }
    return true;
  }

  int flagged_count() const {
    int c = 0;
    for (const auto& r : records) c += r.flagged ? 1 : 0;
    return c;
  }

  std::string to_text() const {
    std::string out;
    out += "audit: " + equation + "\n";
    out += "samples: " + std::to_string(n_samples) + "\n";
    out += "flagged: " + std::to_string(flagged_count()) + " of " +
           std::to_string(records.size()) + " groups\n";
    for (const auto& r : records) {
      out += (r.flagged ? "[FLAG] " : "[ ok ] ") + r.line + " / " + r.group +
             "  |delta| = " + detail::fmt_double(r.delta) +
             "  canonical = " + detail::fmt_double(r.canonical) +
             "  literal = " + detail::fmt_double(r.literal) + "\n";
      out += "       term: " + r.term + "\n";
      if (!r.note.empty()) out += "       note: " + r.note + "\n";
    }
    for (const auto& n : notes) out += "note: " + n + "\n";
    return out;
  }
};

namespace detail {

inline constexpr std::uint64_t kAuditSeed = 9001;

inline bool audit_flags(double can, double lit) {
  return std::abs(can - lit) >
         1e-6 * (1.0 + std::max(std::abs(can), std::abs(lit)));
}

// Accumulates the worst sample for one (line, group) record.
struct GroupTracker {
  AuditRecord rec;

  GroupTracker(std::string line, std::string group, std::string term,
               std::string note = "") {
    rec.line = std::move(line);
    rec.group = std::move(group);
    rec.term = std::move(term);
    rec.note = std::move(note);
    rec.delta = -1.0;
  }

  void update(double can, double lit) {
    const double d = std::abs(can - lit);
    if (d > rec.delta) {
      rec.delta = d;
      rec.canonical = can;
      rec.literal = lit;
    }
    if (audit_flags(can, lit)) rec.flagged = true;
  }

  AuditRecord finish() const {
    AuditRecord r = rec;
    if (r.delta < 0.0) r.delta = 0.0;
    return r;
  }
};

inline Vec audit_point(int k, int dim, double scale = 1.2) {
  Vec z(dim);
  for (int i = 0; i < dim; ++i) {
    z[i] = scale *
           (2.0 * rng::uniform_at(kAuditSeed,
                                  static_cast<std::uint64_t>(k) * dim + i) -
            1.0);
  }
  return z;
}

// Value, gradient, and Hessian of a coefficient polynomial at x.
struct CoeffJet {
  double v = 0.0;
  Vec g;
  Mat H;
};

inline CoeffJet poly_jet(const Polynomial& p, const Vec& x) {
  const int n = p.dim();
  CoeffJet j;
  j.v = p.eval(x);
  j.g = Vec(n);
  j.H = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    const Polynomial di = p.derivative(i);
    j.g[i] = di.eval(x);
    for (int k = 0; k < n; ++k) j.H(i, k) = di.derivative(k).eval(x);
  }
  return j;
}

inline CoeffJet field_jet(const ScalarField& f, const Vec& x,
                          const std::string& what) {
  if (!f.has_grad() || !f.has_hess()) {
    throw field_error(what + ": audit needs analytic first and second "
                      "derivatives on every coefficient");
  }
  CoeffJet j;
  j.v = f.eval(x);
  j.g = f.grad(x);
  j.H = f.hess(x);
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dual of an algebroid, coordinates (x, xi).

inline AuditReport audit_algebroid_dual(const AlgebroidDualInputs& in,
                                        int n_samples = 50) {
  const int n = in.algebroid.n, r = in.algebroid.r;
  const int m = n + r;
  auto sys = algebroid_dual_system(in);
  auto dyn = compile(sys);
  if (!in.algebroid.has_analytic_derivatives()) {
    throw field_error("audit algebroid_dual: algebroid needs analytic "
                      "derivatives");
  }
  const int S = static_cast<int>(in.noise.size());

  using detail::GroupTracker;
  GroupTracker dx_h("dx", "h-coupling", "b_al^i dh/dxi_al");
  GroupTracker dx_c("dx", "correction",
                    "d^{su} b_la^k a_s^la d_k(b_be^i a_u^be)",
                    "written without the 1/2 factor");
  GroupTracker dxi_h(
      "dxi", "h-coupling", "b_al^i dh/dx^i + C^ga_{al be} xi_ga dh/dxi_be",
      "base coupling enters with +b_al^i; the bracket {xi_al, x^i} = "
      "-b_al^i carries the opposite sign");
  GroupTracker dxi_c(
      "dxi", "correction",
      "d^{su} b_ga^j d_j(b_al^i da_u^ga/dx^i) a_s^ep xi_ep + d^{su} "
      "C^ep_{th ga} b_al^i da_u^th/dx^i a_s^ga xi_ep",
      "written without the 1/2 factor");
  std::vector<GroupTracker> dx_d, dxi_d;
  for (int s = 0; s < S; ++s) {
    const std::string g = "diffusion[" + std::to_string(s) + "]";
    dx_d.emplace_back("dx", g, "b_be^i a_s^be");
    dxi_d.emplace_back(
        "dxi", g, "b_al^i da_s^la/dx^i xi_la + C^ga_{al mu} a_s^mu xi_ga",
        "base term enters with +b; the bracket carries -b");
  }

  for (int k = 0; k < n_samples; ++k) {
    const Vec z = detail::audit_point(k, m);
    const Vec x = z.head(n);
    const Vec xi = z.tail(r);
    const Mat b = in.algebroid.anchor(x);
    std::vector<Mat> db;
    db.reserve(n);
    for (int j = 0; j < n; ++j) db.push_back(in.algebroid.danchor(x, j));
    const Tensor3 C = in.algebroid.structure(x);
    const Vec gh = fd_gradient(sys.h, z);
    const Vec strat = dyn.stratonovich_drift(z);
    const Vec corr = dyn.ito_drift(z) - strat;
    const Mat D = dyn.diffusion(z);

    // Section jets: value, gradient, Hessian per fiber component.
    std::vector<std::vector<detail::CoeffJet>> a(S);
    for (int s = 0; s < S; ++s) {
      for (int ga = 0; ga < r; ++ga) {
        a[s].push_back(detail::field_jet(in.noise[s].components[ga], x,
                                         "audit algebroid_dual section"));
      }
    }

    for (int i = 0; i < n; ++i) {
      double lit = 0.0;
      for (int al = 0; al < r; ++al) lit += b(i, al) * gh[n + al];
      dx_h.update(strat[i], lit);

      double lc = 0.0;
      for (int s = 0; s < S; ++s) {
        for (int kk = 0; kk < n; ++kk) {
          double weight = 0.0;
          for (int la = 0; la < r; ++la) weight += b(kk, la) * a[s][la].v;
          double dk = 0.0;
          for (int be = 0; be < r; ++be) {
            dk += db[kk](i, be) * a[s][be].v + b(i, be) * a[s][be].g[kk];
          }
          lc += weight * dk;
        }
      }
      dx_c.update(corr[i], lc);

      for (int s = 0; s < S; ++s) {
        double ld = 0.0;
        for (int be = 0; be < r; ++be) ld += b(i, be) * a[s][be].v;
        dx_d[s].update(D(i, s), ld);
      }
    }

    for (int al = 0; al < r; ++al) {
      double lit = 0.0;
      for (int i = 0; i < n; ++i) lit += b(i, al) * gh[i];
      for (int ga = 0; ga < r; ++ga) {
        for (int be = 0; be < r; ++be) {
          lit += C(ga, al, be) * xi[ga] * gh[n + be];
        }
      }
      dxi_h.update(strat[n + al], lit);

      double lc = 0.0;
      for (int s = 0; s < S; ++s) {
        double fiber = 0.0;
        for (int ep = 0; ep < r; ++ep) fiber += a[s][ep].v * xi[ep];
        double lead = 0.0;
        for (int ga = 0; ga < r; ++ga) {
          for (int j = 0; j < n; ++j) {
            double dj = 0.0;
            for (int i = 0; i < n; ++i) {
              dj += db[j](i, al) * a[s][ga].g[i] + b(i, al) * a[s][ga].H(i, j);
            }
            lead += b(j, ga) * dj;
          }
        }
        lc += lead * fiber;
        for (int ep = 0; ep < r; ++ep) {
          for (int th = 0; th < r; ++th) {
            for (int ga = 0; ga < r; ++ga) {
              double bda = 0.0;
              for (int i = 0; i < n; ++i) bda += b(i, al) * a[s][th].g[i];
              lc += C(ep, th, ga) * bda * a[s][ga].v * xi[ep];
            }
          }
        }
      }
      dxi_c.update(corr[n + al], lc);

      for (int s = 0; s < S; ++s) {
        double ld = 0.0;
        for (int la = 0; la < r; ++la) {
          for (int i = 0; i < n; ++i) ld += b(i, al) * a[s][la].g[i] * xi[la];
        }
        for (int ga = 0; ga < r; ++ga) {
          for (int mu = 0; mu < r; ++mu) {
            ld += C(ga, al, mu) * a[s][mu].v * xi[ga];
          }
        }
        dxi_d[s].update(D(n + al, s), ld);
      }
    }
  }

  AuditReport rep;
  rep.equation = "algebroid_dual";
  rep.n_samples = n_samples;
  rep.records.push_back(dx_h.finish());
  rep.records.push_back(dx_c.finish());
  for (auto& t : dx_d) rep.records.push_back(t.finish());
  rep.records.push_back(dxi_h.finish());
  rep.records.push_back(dxi_c.finish());
  for (auto& t : dxi_d) rep.records.push_back(t.finish());
  return rep;
}

// ---------------------------------------------------------------------------
// Cotangent plus dual, coordinates (x, p, xi).

inline AuditReport audit_whitney_sum(const WhitneySumInputs& in,
                                     int n_samples = 50) {
  const int n = in.algebroid.n, r = in.algebroid.r;
  const int m = 2 * n + r;
  auto sys = whitney_sum_system(in);
  auto dyn = compile(sys);
  if (!in.algebroid.has_analytic_derivatives()) {
    throw field_error("audit whitney_sum: algebroid needs analytic "
                      "derivatives");
  }
  const int S = in.a.rows;
  const bool fiber_reads_momentum = r <= n;

  using detail::GroupTracker;
  GroupTracker dx_h(
      "dx", "h-coupling",
      "(k^{ij} + b_al^i k^{j al}) p_j + (k^{i be} + b_al^i k^{al be}) p_be",
      fiber_reads_momentum
          ? "the trailing factor reads p_be with a fiber index; evaluated "
            "from the momentum block as written"
          : "the trailing factor reads p_be with a fiber index that exceeds "
            "the momentum block; sub-term excluded");
  GroupTracker dx_c(
      "dx", "correction",
      "d^{su} (d_u^j + b_al^j a_u^al) d_j(d_s^i + b_al^i a_s^al)",
      "the differentiated coefficient is written base-indexed as a_s^i, "
      "which is undefined; d_s^i substituted. written without the 1/2 "
      "factor");
  GroupTracker dp_h("dp", "h-coupling", "-(1/2) dk^{hl}/dx^j p_h p_l",
                    "x-derivatives of the p-xi and xi-xi tables do not "
                    "appear");
  GroupTracker dp_c(
      "dp", "correction",
      "-d^{us} (b_al^m a_u^al + d_u^m)(d2a_s^ga/dx^m dx^j xi_ga + "
      "d2d_s^i/dx^m dx^j p_i)",
      "a trailing sub-term differentiates a fiber-indexed d_s^al, which is "
      "undefined, and repeats a bound index; excluded. written without the "
      "1/2 factor");
  GroupTracker dxi_h(
      "dxi", "h-coupling",
      "-b_al^i ((1/2) dk^{hl}/dx^i p_h p_l + dk^{al be}/dx^i xi_al xi_be + "
      "(1/2) dk^{j be}/dx^i p_j xi_be)",
      "the middle term repeats the free fiber index and drops its 1/2; the "
      "last term carries a spurious 1/2; the fiber rotation C xi dh/dxi "
      "does not appear");
  GroupTracker dxi_c(
      "dxi", "correction",
      "-d^{us} (b_be^l a_u^be + d_u^l) d_l(b_al^i (da_s^be/dx^i xi_be + "
      "dd_s^j/dx^i p_j)) + d^{su} b_al^i (dd_s^l/dx^i + b_ga^l "
      "da_s^ga/dx^i)(da_u^mu/dx^l xi_mu + dd_s^j/dx^i p_j)",
      "written without the 1/2 factor; the final factor differentiates "
      "with respect to x^i where x^l is expected");
  std::vector<GroupTracker> dx_d, dp_d, dxi_d;
  for (int s = 0; s < S; ++s) {
    const std::string g = "diffusion[" + std::to_string(s) + "]";
    dx_d.emplace_back("dx", g, "d_s^i + b_al^i a_s^al");
    dp_d.emplace_back("dp", g, "da_s^al/dx^j xi_al + dd_s^i/dx^j p_i",
                      "enters with +; the bracket {p_j, g_s} = -d_j g_s "
                      "carries the opposite sign");
    dxi_d.emplace_back("dxi", g,
                       "-b_al^i (da_s^be/dx^i xi_be + dd_s^j/dx^i p_j)",
                       "the fiber rotation C^ga_{al be} a_s^be xi_ga does "
                       "not appear");
  }

  for (int kpt = 0; kpt < n_samples; ++kpt) {
    const Vec z = detail::audit_point(kpt, m);
    const Vec x = z.head(n);
    const Vec p = z.segment(n, n);
    const Vec xi = z.tail(r);
    const Mat b = in.algebroid.anchor(x);
    std::vector<Mat> db;
    db.reserve(n);
    for (int j = 0; j < n; ++j) db.push_back(in.algebroid.danchor(x, j));
    const Vec gh = fd_gradient(sys.h, z);
    const Vec strat = dyn.stratonovich_drift(z);
    const Vec corr = dyn.ito_drift(z) - strat;
    const Mat D = dyn.diffusion(z);

    auto jet = [&x](const Polynomial& q) { return detail::poly_jet(q, x); };
    std::vector<std::vector<detail::CoeffJet>> a(S), d(S);
    for (int s = 0; s < S; ++s) {
      for (int al = 0; al < r; ++al) a[s].push_back(jet(in.a(s, al)));
      for (int i = 0; i < n; ++i) d[s].push_back(jet(in.d(s, i)));
    }
    // Table values and x-derivatives at this point.
    Mat kpp(n, n), kpxi(n, r), kxixi(r, r);
    std::vector<Mat> dkpp(n, Mat(n, n)), dkpxi(n, Mat(n, r)),
        dkxixi(n, Mat(r, r));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        kpp(i, j) = in.kpp(i, j).eval(x);
        for (int w = 0; w < n; ++w) {
          dkpp[w](i, j) = in.kpp(i, j).derivative(w).eval(x);
        }
      }
      for (int al = 0; al < r; ++al) {
        kpxi(i, al) = in.kpxi(i, al).eval(x);
        for (int w = 0; w < n; ++w) {
          dkpxi[w](i, al) = in.kpxi(i, al).derivative(w).eval(x);
        }
      }
    }
    for (int al = 0; al < r; ++al) {
      for (int be = 0; be < r; ++be) {
        kxixi(al, be) = in.kxixi(al, be).eval(x);
        for (int w = 0; w < n; ++w) {
          dkxixi[w](al, be) = in.kxixi(al, be).derivative(w).eval(x);
        }
      }
    }

    for (int i = 0; i < n; ++i) {
      double lit = 0.0;
      for (int j = 0; j < n; ++j) {
        double c = kpp(i, j);
        for (int al = 0; al < r; ++al) c += b(i, al) * kpxi(j, al);
        lit += c * p[j];
      }
      if (fiber_reads_momentum) {
        for (int be = 0; be < r; ++be) {
          double c = kpxi(i, be);
          for (int al = 0; al < r; ++al) c += b(i, al) * kxixi(al, be);
          lit += c * p[be];
        }
      }
      dx_h.update(strat[i], lit);

      double lc = 0.0;
      for (int s = 0; s < S; ++s) {
        for (int j = 0; j < n; ++j) {
          double weight = d[s][j].v;
          for (int al = 0; al < r; ++al) weight += b(j, al) * a[s][al].v;
          double dj = d[s][i].g[j];
          for (int al = 0; al < r; ++al) {
            dj += db[j](i, al) * a[s][al].v + b(i, al) * a[s][al].g[j];
          }
          lc += weight * dj;
        }
      }
      dx_c.update(corr[i], lc);

      for (int s = 0; s < S; ++s) {
        double ld = d[s][i].v;
        for (int al = 0; al < r; ++al) ld += b(i, al) * a[s][al].v;
        dx_d[s].update(D(i, s), ld);
      }
    }

    for (int j = 0; j < n; ++j) {
      double lit = 0.0;
      for (int hh = 0; hh < n; ++hh) {
        for (int l = 0; l < n; ++l) lit -= 0.5 * dkpp[j](hh, l) * p[hh] * p[l];
      }
      dp_h.update(strat[n + j], lit);

      double lc = 0.0;
      for (int s = 0; s < S; ++s) {
        for (int mm = 0; mm < n; ++mm) {
          double weight = d[s][mm].v;
          for (int al = 0; al < r; ++al) weight += b(mm, al) * a[s][al].v;
          double second = 0.0;
          for (int ga = 0; ga < r; ++ga) second += a[s][ga].H(mm, j) * xi[ga];
          for (int i = 0; i < n; ++i) second += d[s][i].H(mm, j) * p[i];
          lc -= weight * second;
        }
      }
      dp_c.update(corr[n + j], lc);

      for (int s = 0; s < S; ++s) {
        double ld = 0.0;
        for (int al = 0; al < r; ++al) ld += a[s][al].g[j] * xi[al];
        for (int i = 0; i < n; ++i) ld += d[s][i].g[j] * p[i];
        dp_d[s].update(D(n + j, s), ld);
      }
    }

    for (int al = 0; al < r; ++al) {
      double lit = 0.0;
      for (int i = 0; i < n; ++i) {
        double inner = 0.0;
        for (int hh = 0; hh < n; ++hh) {
          for (int l = 0; l < n; ++l) {
            inner += 0.5 * dkpp[i](hh, l) * p[hh] * p[l];
          }
        }
        for (int be = 0; be < r; ++be) {
          inner += dkxixi[i](al, be) * xi[al] * xi[be];
        }
        for (int j = 0; j < n; ++j) {
          for (int be = 0; be < r; ++be) {
            inner += 0.5 * dkpxi[i](j, be) * p[j] * xi[be];
          }
        }
        lit -= b(i, al) * inner;
      }
      dxi_h.update(strat[2 * n + al], lit);

      double lc = 0.0;
      for (int s = 0; s < S; ++s) {
        for (int l = 0; l < n; ++l) {
          double weight = d[s][l].v;
          for (int be = 0; be < r; ++be) weight += b(l, be) * a[s][be].v;
          double dl = 0.0;
          for (int i = 0; i < n; ++i) {
            double bracket_i = 0.0;
            for (int be = 0; be < r; ++be) bracket_i += a[s][be].g[i] * xi[be];
            for (int j = 0; j < n; ++j) bracket_i += d[s][j].g[i] * p[j];
            dl += db[l](i, al) * bracket_i;
            double dbr = 0.0;
            for (int be = 0; be < r; ++be) dbr += a[s][be].H(i, l) * xi[be];
            for (int j = 0; j < n; ++j) dbr += d[s][j].H(i, l) * p[j];
            dl += b(i, al) * dbr;
          }
          lc -= weight * dl;
        }
        for (int i = 0; i < n; ++i) {
          for (int l = 0; l < n; ++l) {
            double mid = d[s][l].g[i];
            for (int ga = 0; ga < r; ++ga) mid += b(l, ga) * a[s][ga].g[i];
            double tail = 0.0;
            for (int mu = 0; mu < r; ++mu) tail += a[s][mu].g[l] * xi[mu];
            for (int j = 0; j < n; ++j) tail += d[s][j].g[i] * p[j];
            lc += b(i, al) * mid * tail;
          }
        }
      }
      dxi_c.update(corr[2 * n + al], lc);

      for (int s = 0; s < S; ++s) {
        double ld = 0.0;
        for (int i = 0; i < n; ++i) {
          double inner = 0.0;
          for (int be = 0; be < r; ++be) inner += a[s][be].g[i] * xi[be];
          for (int j = 0; j < n; ++j) inner += d[s][j].g[i] * p[j];
          ld -= b(i, al) * inner;
        }
        dxi_d[s].update(D(2 * n + al, s), ld);
      }
    }
  }

  AuditReport rep;
  rep.equation = "whitney_sum";
  rep.n_samples = n_samples;
  rep.records.push_back(dx_h.finish());
  rep.records.push_back(dx_c.finish());
  for (auto& t : dx_d) rep.records.push_back(t.finish());
  rep.records.push_back(dp_h.finish());
  rep.records.push_back(dp_c.finish());
  for (auto& t : dp_d) rep.records.push_back(t.finish());
  rep.records.push_back(dxi_h.finish());
  rep.records.push_back(dxi_c.finish());
  for (auto& t : dxi_d) rep.records.push_back(t.finish());
  return rep;
}

// ---------------------------------------------------------------------------
// Connection-coupled bundle, coordinates (x, p, mu). Single noise channel.

inline AuditReport audit_adjoint_bundle(const AdjointBundleInputs& in,
                                        int n_samples = 50) {
  if (in.noise.size() != 1) {
    throw field_error("audit adjoint_bundle: the expanded form carries a "
                      "single noise channel");
  }
  const int n = in.conn.n, P = in.conn.algebra.p;
  const int m = 2 * n + P;
  auto sys = adjoint_bundle_system(in);
  auto dyn = compile(sys);
  // The unexpanded nested brackets evaluate on the structure as written.
  AdjointBundleInputs printed_in = in;
  printed_in.orientation = AdjointOrientation::as_printed;
  auto printed_sys = adjoint_bundle_system(printed_in);
  auto printed_corr =
      detail::make_correction_evaluator(printed_sys, ItoConvention::unhalved);
  const Tensor3& Cc = in.conn.algebra.constants;

  using detail::GroupTracker;
  GroupTracker dx_h("dx", "h-coupling", "dh/dx^i",
                    "the pairing {x^i, p_j} = delta couples dh/dp_i; "
                    "dh/dx^i evaluated as written");
  GroupTracker dx_c("dx", "correction", "da^i/dx^l a^l",
                    "written without the 1/2 factor");
  GroupTracker dx_d("dx", "diffusion[0]", "a^i");
  GroupTracker dp_h("dp", "h-coupling", "-dh/dx^i - B^c_{ij} mu_c dh/dp_j",
                    "a third coupling -C^d_{ca} mu_a A^c_i dh/dmu_a leaves d "
                    "unsaturated and repeats a; excluded");
  GroupTracker dp_c("dp", "correction", "{{p_i, f}, f}",
                    "nested brackets on the structure as written, without "
                    "the 1/2 factor");
  GroupTracker dp_d("dp", "diffusion[0]",
                    "-(B^c_{ij} mu_c a^j + C^d_{ca} mu_d A^c_i d^a)",
                    "the coefficient derivatives -d_i(a^j) p_j - d_i(d^a) "
                    "mu_a do not appear");
  GroupTracker dmu_h("dmu", "h-coupling",
                     "C^d_{ca} mu_d A^c_j dh/dp_j + C^c_{ab} mu_c dh/dmu_b",
                     "the fiber block enters with +C; the orientation that "
                     "satisfies the Jacobi identity carries -C");
  GroupTracker dmu_c("dmu", "correction", "{{mu_a, f}, f}",
                     "nested brackets on the structure as written, without "
                     "the 1/2 factor");
  GroupTracker dmu_d("dmu", "diffusion[0]",
                     "C^d_{ca} mu_d A^c_j a^j + C^c_{ab} mu_c d^b",
                     "fiber block sign as in the h-coupling note");

  for (int kpt = 0; kpt < n_samples; ++kpt) {
    const Vec z = detail::audit_point(kpt, m);
    const Vec x = z.head(n);
    const Vec mu = z.tail(P);
    const Mat A = in.conn.coeff(x);
    const Tensor3 B = curvature(in.conn, x);
    const Vec gh = fd_gradient(sys.h, z);
    const Vec strat = dyn.stratonovich_drift(z);
    const Vec corr = dyn.ito_drift(z) - strat;
    const Mat D = dyn.diffusion(z);
    const Vec lit_corr = printed_corr.eval(z);

    std::vector<detail::CoeffJet> a, d;
    for (int j = 0; j < n; ++j) {
      a.push_back(detail::poly_jet(in.noise[0].a[j], x));
    }
    for (int c = 0; c < P; ++c) {
      d.push_back(detail::poly_jet(in.noise[0].d[c], x));
    }

    for (int i = 0; i < n; ++i) {
      dx_h.update(strat[i], gh[i]);
      double lc = 0.0;
      for (int l = 0; l < n; ++l) lc += a[i].g[l] * a[l].v;
      dx_c.update(corr[i], lc);
      dx_d.update(D(i, 0), a[i].v);

      double lp = -gh[i];
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < P; ++c) lp -= B(c, i, j) * mu[c] * gh[n + j];
      }
      dp_h.update(strat[n + i], lp);
      dp_c.update(corr[n + i], lit_corr[n + i]);

      double ld = 0.0;
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < P; ++c) ld -= B(c, i, j) * mu[c] * a[j].v;
      }
      for (int aa = 0; aa < P; ++aa) {
        for (int c = 0; c < P; ++c) {
          for (int dd = 0; dd < P; ++dd) {
            ld -= Cc(dd, c, aa) * mu[dd] * A(c, i) * d[aa].v;
          }
        }
      }
      dp_d.update(D(n + i, 0), ld);
    }

    for (int aa = 0; aa < P; ++aa) {
      double lh = 0.0;
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < P; ++c) {
          for (int dd = 0; dd < P; ++dd) {
            lh += Cc(dd, c, aa) * mu[dd] * A(c, j) * gh[n + j];
          }
        }
      }
      for (int bb = 0; bb < P; ++bb) {
        for (int c = 0; c < P; ++c) {
          lh += Cc(c, aa, bb) * mu[c] * gh[2 * n + bb];
        }
      }
      dmu_h.update(strat[2 * n + aa], lh);
      dmu_c.update(corr[2 * n + aa], lit_corr[2 * n + aa]);

      double ld = 0.0;
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < P; ++c) {
          for (int dd = 0; dd < P; ++dd) {
            ld += Cc(dd, c, aa) * mu[dd] * A(c, j) * a[j].v;
          }
        }
      }
      for (int bb = 0; bb < P; ++bb) {
        for (int c = 0; c < P; ++c) {
          ld += Cc(c, aa, bb) * mu[c] * d[bb].v;
        }
      }
      dmu_d.update(D(2 * n + aa, 0), ld);
    }
  }

  AuditReport rep;
  rep.equation = "adjoint_bundle";
  rep.n_samples = n_samples;
  rep.records.push_back(dx_h.finish());
  rep.records.push_back(dx_c.finish());
  rep.records.push_back(dx_d.finish());
  rep.records.push_back(dp_h.finish());
  rep.records.push_back(dp_c.finish());
  rep.records.push_back(dp_d.finish());
  rep.records.push_back(dmu_h.finish());
  rep.records.push_back(dmu_c.finish());
  rep.records.push_back(dmu_d.finish());
  return rep;
}

// ---------------------------------------------------------------------------
// Affine refinement, coordinates (x, p, mu_k^l, mu_l). Single noise channel.

inline AuditReport audit_affine_refinement(const AffineRefinementInputs& in,
                                           int n_samples = 50) {
  if (in.noise.size() != 1) {
    throw field_error("audit affine_refinement: the expanded form carries a "
                      "single noise channel");
  }
  const int n = in.package.n;
  const int m = 2 * n + n * n + n;
  const int mu_off = 2 * n, tr_off = 2 * n + n * n;
  auto sys = affine_refinement_system(in);
  auto dyn = compile(sys);
  auto lit_corr_eval =
      detail::make_correction_evaluator(sys, ItoConvention::unhalved);
  const PolyTensor3& Agl = *in.package.gl_table;

  using detail::GroupTracker;
  GroupTracker dx_h("dx", "h-coupling", "dh/dp_i");
  GroupTracker dx_c("dx", "correction", "da^i/dx^k a^k",
                    "written without the 1/2 factor");
  GroupTracker dx_d("dx", "diffusion[0]", "a^i");
  GroupTracker dp_h(
      "dp", "h-coupling",
      "+dh/dx^i - (B^l_{kij} mu_l^k + B^l_{ij} mu_l) dh/dp_j + ((A^p_{ki} "
      "d^l_q - A^l_{qi} d^p_k) mu_p^q - A^l_i mu_k) dh/dmu_k^l + A^p_{ki} "
      "mu_p dh/dmu_k",
      "dh/dx^i enters with +; the bracket {p_i, h} carries -dh/dx^i");
  GroupTracker dp_c("dp", "correction", "{{p_i, f}, f}",
                    "written without the 1/2 factor");
  GroupTracker dp_d("dp", "diffusion[0]", "{p_i, f}");
  GroupTracker dmu_h(
      "dmu_gl", "h-coupling",
      "((A^p_{ki} d^l_q - A^l_{qi} d^p_k) mu_p^q - A^l_i mu_k) d_l^k + "
      "A^p_{ki} mu_p^l g^i",
      "no dh coupling appears on this line; the first term leaves i "
      "unsaturated and is excluded; the second couples the noise "
      "coefficient g into the drift and is evaluated as written");
  GroupTracker dmu_c("dmu_gl", "correction", "{{mu_k^l, f}, f}",
                     "written without the 1/2 factor");
  GroupTracker dmu_d("dmu_gl", "diffusion[0]", "{mu_k^l, f}");
  GroupTracker dtr_h(
      "dmu_tr", "h-coupling", "-A^p_{ik} mu_p a^k - mu_i d^l_k d_l^k",
      "no dh coupling appears on this line; the terms couple the noise "
      "coefficients into the drift and are evaluated as written");
  GroupTracker dtr_c("dmu_tr", "correction", "{{mu_i, f}, f}",
                     "written without the 1/2 factor");
  GroupTracker dtr_d("dmu_tr", "diffusion[0]", "{mu_i, f}");

  for (int kpt = 0; kpt < n_samples; ++kpt) {
    const Vec z = detail::audit_point(kpt, m);
    const Vec x = z.head(n);
    const Vec gh = fd_gradient(sys.h, z);
    const Vec strat = dyn.stratonovich_drift(z);
    const Vec corr = dyn.ito_drift(z) - strat;
    const Mat D = dyn.diffusion(z);
    const Vec lit_corr = lit_corr_eval.eval(z);
    const Mat L = sys.P.lambda(z);

    std::vector<detail::CoeffJet> a, g;
    Mat dval(n, n);
    for (int j = 0; j < n; ++j) {
      a.push_back(detail::poly_jet(in.noise[0].a[j], x));
      g.push_back(detail::poly_jet(in.noise[0].g[j], x));
      for (int l = 0; l < n; ++l) dval(j, l) = in.noise[0].d(j, l).eval(x);
    }
    Tensor3 Aval(n, n, n);
    for (int hh = 0; hh < n; ++hh) {
      for (int kk = 0; kk < n; ++kk) {
        for (int rr = 0; rr < n; ++rr) {
          Aval(hh, kk, rr) = Agl(hh, kk, rr).eval(x);
        }
      }
    }
    auto mu = [&](int k, int l) {
      return z[mu_off + refinement_mu_slot(n, k, l)];
    };

    for (int i = 0; i < n; ++i) {
      dx_h.update(strat[i], gh[n + i]);
      double lc = 0.0;
      for (int k = 0; k < n; ++k) lc += a[i].g[k] * a[k].v;
      dx_c.update(corr[i], lc);
      dx_d.update(D(i, 0), a[i].v);

      // Every momentum-row coupling except the base pairing matches the
      // structure, so the literal is the structure contraction with the
      // base-derivative sign flipped.
      double lp = gh[i];
      for (int J = n; J < m; ++J) lp += L(n + i, J) * gh[J];
      dp_h.update(strat[n + i], lp);
      dp_c.update(corr[n + i], lit_corr[n + i]);
      dp_d.update(D(n + i, 0), D(n + i, 0));
    }

    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        const int row = mu_off + refinement_mu_slot(n, k, l);
        double lh = 0.0;
        for (int pp = 0; pp < n; ++pp) {
          for (int i = 0; i < n; ++i) {
            lh += Aval(pp, k, i) * mu(pp, l) * g[i].v;
          }
        }
        dmu_h.update(strat[row], lh);
        dmu_c.update(corr[row], lit_corr[row]);
        dmu_d.update(D(row, 0), D(row, 0));
      }
    }

    double dtrace = 0.0;
    for (int k = 0; k < n; ++k) dtrace += dval(k, k);
    for (int i = 0; i < n; ++i) {
      const int row = tr_off + i;
      double lh = 0.0;
      for (int pp = 0; pp < n; ++pp) {
        for (int k = 0; k < n; ++k) {
          lh -= Aval(pp, i, k) * z[tr_off + pp] * a[k].v;
        }
      }
      lh -= z[tr_off + i] * dtrace;
      dtr_h.update(strat[row], lh);
      dtr_c.update(corr[row], lit_corr[row]);
      dtr_d.update(D(row, 0), D(row, 0));
    }
  }

  AuditReport rep;
  rep.equation = "affine_refinement";
  rep.n_samples = n_samples;
  rep.records.push_back(dx_h.finish());
  rep.records.push_back(dx_c.finish());
  rep.records.push_back(dx_d.finish());
  rep.records.push_back(dp_h.finish());
  rep.records.push_back(dp_c.finish());
  rep.records.push_back(dp_d.finish());
  rep.records.push_back(dmu_h.finish());
  rep.records.push_back(dmu_c.finish());
  rep.records.push_back(dmu_d.finish());
  rep.records.push_back(dtr_h.finish());
  rep.records.push_back(dtr_c.finish());
  rep.records.push_back(dtr_d.finish());
  return rep;
}

// ---------------------------------------------------------------------------
// Matrix refinement, coordinates (x, q, p, lambda, mu). Single noise channel.

inline AuditReport audit_gl_refinement(const GlRefinementInputs& in,
                                       int n_samples = 50) {
  if (in.noise.size() != 1) {
    throw field_error("audit gl_refinement: the expanded form carries a "
                      "single noise channel");
  }
  const int n = in.data.n;
  const int m = 4 * n + n * n;
  const int p_off = 2 * n, lam_off = 3 * n, mu_off = 4 * n;
  auto sys = gl_refinement_system(in);
  auto dyn = compile(sys);
  auto lit_corr_eval =
      detail::make_correction_evaluator(sys, ItoConvention::unhalved);

  using detail::GroupTracker;
  GroupTracker dx_h("dx", "h-coupling", "dh/dp_i",
                    "the pairing as written also couples dh/dlambda_i "
                    "through {x^i, lambda_j} = delta");
  GroupTracker dx_c("dx", "correction", "{{x^i, f}, f}",
                    "written without the 1/2 factor");
  GroupTracker dx_d("dx", "diffusion[0]", "{x^i, f}");
  GroupTracker dq_h("dq", "h-coupling", "dh/dlambda_i",
                    "the q row of the structure as written is zero; no "
                    "drift is generated by the bracket");
  GroupTracker dq_c("dq", "correction", "{{q^i, f}, f}",
                    "written without the 1/2 factor");
  GroupTracker dq_d("dq", "diffusion[0]", "{q^i, f}");
  GroupTracker dp_h(
      "dp", "h-coupling",
      "-dh/dx^i + (A^p_{ki} d^l_q - A^l_{qi} d^p_k) mu_p^q dh/dmu_k^l",
      "a curvature term -(1/2) B^l_{kij} mu_l^k leaves j unsaturated and is "
      "excluded; the curvature couplings into dh/dp_j and dh/dlambda_j do "
      "not appear");
  GroupTracker dp_c("dp", "correction", "{{p_i, f}, f}",
                    "written without the 1/2 factor");
  GroupTracker dp_d("dp", "diffusion[0]", "{p_i, f}");
  GroupTracker dl_h(
      "dlambda", "h-coupling",
      "-dh/dq^i + (B^p_{ki} d^l_q - B^l_{qi} d^p_k) mu_p^q dh/dmu_k^l",
      "the x pairing gives -dh/dx^i rather than -dh/dq^i; a curvature term "
      "-(1/2) B^l_{kij} mu_l^k leaves j unsaturated and is excluded");
  GroupTracker dl_c("dlambda", "correction", "{{lambda_i, f}, f}",
                    "written without the 1/2 factor");
  GroupTracker dl_d("dlambda", "diffusion[0]", "{lambda_i, f}");
  GroupTracker dmu_h(
      "dmu", "h-coupling",
      "-(A^p_{kj} d^l_q + A^l_{qj} d^p_k) mu_p^q dh/dp_j - B^p_{kj} mu_p^l "
      "dh/dlambda_j + (d^l_j mu_k^i - d^i_k mu_j^l) dh/dmu_j^i",
      "the horizontal coupling enters with +A^l_{qj} where the structure "
      "carries -A^l_{qj}; the vertical coupling's second piece leaves an "
      "index unsaturated and is excluded");
  GroupTracker dmu_c("dmu", "correction", "{{mu_k^l, f}, f}",
                     "written without the 1/2 factor");
  GroupTracker dmu_d("dmu", "diffusion[0]", "{mu_k^l, f}");

  for (int kpt = 0; kpt < n_samples; ++kpt) {
    const Vec z = detail::audit_point(kpt, m);
    const Vec xq = z.head(2 * n);
    const Vec gh = fd_gradient(sys.h, z);
    const Vec strat = dyn.stratonovich_drift(z);
    const Vec corr = dyn.ito_drift(z) - strat;
    const Mat D = dyn.diffusion(z);
    const Vec lit_corr = lit_corr_eval.eval(z);

    Tensor3 Aval(n, n, n), Bval(n, n, n);
    for (int hh = 0; hh < n; ++hh) {
      for (int kk = 0; kk < n; ++kk) {
        for (int rr = 0; rr < n; ++rr) {
          Aval(hh, kk, rr) = in.data.A(hh, kk, rr).eval(xq);
          Bval(hh, kk, rr) = in.data.Bq(hh, kk, rr).eval(xq);
        }
      }
    }
    auto mu = [&](int j, int k) {
      return z[mu_off + refinement_mu_slot(n, j, k)];
    };
    auto ghmu = [&](int k, int l) {
      return gh[mu_off + refinement_mu_slot(n, k, l)];
    };

    for (int i = 0; i < n; ++i) {
      dx_h.update(strat[i], gh[p_off + i]);
      dx_c.update(corr[i], lit_corr[i]);
      dx_d.update(D(i, 0), D(i, 0));

      dq_h.update(strat[n + i], gh[lam_off + i]);
      dq_c.update(corr[n + i], lit_corr[n + i]);
      dq_d.update(D(n + i, 0), D(n + i, 0));

      double lp = -gh[i];
      double ll = -gh[n + i];
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          double nabA = 0.0, nabB = 0.0;
          for (int pp = 0; pp < n; ++pp) {
            nabA += Aval(pp, k, i) * mu(pp, l);
            nabB += Bval(pp, k, i) * mu(pp, l);
          }
          for (int qq = 0; qq < n; ++qq) {
            nabA -= Aval(l, qq, i) * mu(k, qq);
            nabB -= Bval(l, qq, i) * mu(k, qq);
          }
          lp += nabA * ghmu(k, l);
          ll += nabB * ghmu(k, l);
        }
      }
      dp_h.update(strat[p_off + i], lp);
      dp_c.update(corr[p_off + i], lit_corr[p_off + i]);
      dp_d.update(D(p_off + i, 0), D(p_off + i, 0));

      dl_h.update(strat[lam_off + i], ll);
      dl_c.update(corr[lam_off + i], lit_corr[lam_off + i]);
      dl_d.update(D(lam_off + i, 0), D(lam_off + i, 0));
    }

    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        const int row = mu_off + refinement_mu_slot(n, k, l);
        double lh = 0.0;
        for (int j = 0; j < n; ++j) {
          double hor = 0.0;
          for (int pp = 0; pp < n; ++pp) hor += Aval(pp, k, j) * mu(pp, l);
          for (int qq = 0; qq < n; ++qq) hor += Aval(l, qq, j) * mu(k, qq);
          lh -= hor * gh[p_off + j];
          double ver = 0.0;
          for (int pp = 0; pp < n; ++pp) ver += Bval(pp, k, j) * mu(pp, l);
          lh -= ver * gh[lam_off + j];
        }
        for (int j = 0; j < n; ++j) {
          for (int i = 0; i < n; ++i) {
            const double c =
                (l == j ? mu(k, i) : 0.0) - (i == k ? mu(j, l) : 0.0);
            if (c != 0.0) lh += c * ghmu(j, i);
          }
        }
        dmu_h.update(strat[row], lh);
        dmu_c.update(corr[row], lit_corr[row]);
        dmu_d.update(D(row, 0), D(row, 0));
      }
    }
  }

  AuditReport rep;
  rep.equation = "gl_refinement";
  rep.n_samples = n_samples;
  rep.records.push_back(dx_h.finish());
  rep.records.push_back(dx_c.finish());
  rep.records.push_back(dx_d.finish());
  rep.records.push_back(dq_h.finish());
  rep.records.push_back(dq_c.finish());
  rep.records.push_back(dq_d.finish());
  rep.records.push_back(dp_h.finish());
  rep.records.push_back(dp_c.finish());
  rep.records.push_back(dp_d.finish());
  rep.records.push_back(dl_h.finish());
  rep.records.push_back(dl_c.finish());
  rep.records.push_back(dl_d.finish());
  rep.records.push_back(dmu_h.finish());
  rep.records.push_back(dmu_c.finish());
  rep.records.push_back(dmu_d.finish());
  return rep;
}

inline AuditReport audit_expanded(const ExpandedInputs& inputs,
                                  int n_samples = 50) {
  struct Auditor {
    int n_samples;
    AuditReport operator()(const AlgebroidDualInputs& in) const {
      return audit_algebroid_dual(in, n_samples);
    }
    AuditReport operator()(const WhitneySumInputs& in) const {
      return audit_whitney_sum(in, n_samples);
    }
    AuditReport operator()(const AdjointBundleInputs& in) const {
      return audit_adjoint_bundle(in, n_samples);
    }
    AuditReport operator()(const AffineRefinementInputs& in) const {
      return audit_affine_refinement(in, n_samples);
    }
    AuditReport operator()(const GlRefinementInputs& in) const {
      return audit_gl_refinement(in, n_samples);
    }
  };
  return std::visit(Auditor{n_samples}, inputs);
}

}  // namespace liepoisson
