#include "mcn/constructive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mcn/builder.hpp"
#include "mcn/serialize.hpp"

namespace mcn {
namespace {

using nlohmann::json;

// One ulp of slack reported for constructions that are exact in exact
// arithmetic (the certificate bound must stay strictly positive).
constexpr double kUlpSlack = 0x1p-52;
// Rounding slack added to bounds of the deep trig/series pipelines, whose
// range-reduction affines are exact only up to double rounding.
constexpr double kFpAllowance = 1e-12;

double eps0(int t) { return std::ldexp(1.0, -t); }
double eps2(int t) { return 6.0 * eps0(t); }

// Sup distance of the pairwise product block from ab when its inputs carry
// drifts eA, eB on top of values in [-1,1]. Covers the slight domain
// overshoot the drifts can cause.
double prod2Drift(int t, double eA, double eB) {
  const double s = eA + eB;
  return eps2(t) + s + 2.0 * eA * eB + 2.0 * eps0(t) * s + 2.0 * s * s;
}

void requireStages(int m, int l) {
  if (m < 1 || l < 1) {
    throw std::invalid_argument("builders: m and l must be >= 1");
  }
  if (m * l > 50) {
    throw std::invalid_argument(
        "builders: m*l = " + std::to_string(m * l) +
        " stages exceed double-precision resolution (max 50)");
  }
}

void requireTaylorDegree(int p) {
  if (p < 4 || p % 2 != 0) {
    throw std::invalid_argument(
        "builders: Taylor degree p must be even and >= 4, got " +
        std::to_string(p));
  }
  if (p > 60) {
    throw std::invalid_argument("builders: Taylor degree p > 60 not supported");
  }
}

Aff shift(Aff a, double c) {
  a.bias += c;
  return a;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Lockstep sawtooth gadgets appended onto an open-ended builder.

struct GadgetOut {
  std::vector<Aff> values;  // one per source / pair, over the new top state
  std::vector<Chan> kept;   // carried channels, same order as requested
  std::vector<Chan> extra;  // channels materialized from extraLin
};

// Appends the layers computing the sawtooth square S(src) for all sources in
// lockstep: an |.| layer (when takeAbs) followed by t stages
//   r_1 = max{-u/2, u/2 - 1/2},   r_s = max{r/2, -r/2 - 2^(1-2s)},
// with a running accumulator acc = u + sum_{i<s} r_i. Each value comes back
// as the two-term expression acc + r_t, i.e. the piecewise-linear
// interpolant of src^2 on the 2^-t grid. `keep` channels are carried
// through; `extraLin` expressions over the current top are materialized in
// the first appended layer and then carried.
GadgetOut appendSquareBatch(NetBuilder& b, const std::vector<Aff>& srcs, int t,
                            const std::vector<Chan>& keep,
                            const std::vector<Aff>& extraLin, bool takeAbs) {
  const std::size_t nsrc = srcs.size();
  std::vector<Chan> live;  // extras first, then keeps
  std::vector<Chan> acc(nsrc), r(nsrc);
  std::vector<Aff> stageSrc = srcs;
  bool liveInitialized = false;

  auto initLive = [&]() {
    for (const Aff& e : extraLin) live.push_back(b.lin(e));
    for (Chan c : keep) live.push_back(b.carry(c));
    liveInitialized = true;
  };
  auto carryLive = [&]() {
    for (Chan& c : live) c = b.carry(c);
  };

  if (takeAbs) {
    b.beginLayer(Activation::Identity(), b.topLayer());
    initLive();
    std::vector<Chan> u(nsrc);
    for (std::size_t i = 0; i < nsrc; ++i) {
      u[i] = b.maxUnit(srcs[i], srcs[i].scaled(-1.0));
    }
    b.endLayer();
    for (std::size_t i = 0; i < nsrc; ++i) stageSrc[i] = Aff::of(u[i]);
  }

  for (int s = 1; s <= t; ++s) {
    b.beginLayer(Activation::Identity(), b.topLayer());
    if (s == 1) {
      if (!liveInitialized) {
        initLive();
      } else {
        carryLive();
      }
      for (std::size_t i = 0; i < nsrc; ++i) acc[i] = b.lin(stageSrc[i]);
      for (std::size_t i = 0; i < nsrc; ++i) {
        r[i] = b.maxUnit(stageSrc[i].scaled(-0.5),
                         shift(stageSrc[i].scaled(0.5), -0.5));
      }
    } else {
      carryLive();
      const double c = -std::ldexp(1.0, 1 - 2 * s);
      std::vector<Chan> acc2(nsrc), r2(nsrc);
      for (std::size_t i = 0; i < nsrc; ++i) {
        Aff a = Aff::of(acc[i]);
        a.add(r[i], 1.0);
        acc2[i] = b.lin(a);
      }
      for (std::size_t i = 0; i < nsrc; ++i) {
        r2[i] = b.maxUnit(Aff::of(r[i], 0.5), Aff::of(r[i], -0.5, c));
      }
      acc = acc2;
      r = r2;
    }
    b.endLayer();
  }

  GadgetOut out;
  out.values.reserve(nsrc);
  for (std::size_t i = 0; i < nsrc; ++i) {
    Aff v = Aff::of(acc[i]);
    v.add(r[i], 1.0);
    out.values.push_back(std::move(v));
  }
  out.extra.assign(live.begin(),
                   live.begin() + static_cast<std::ptrdiff_t>(extraLin.size()));
  out.kept.assign(live.begin() + static_cast<std::ptrdiff_t>(extraLin.size()),
                  live.end());
  return out;
}

// Pairwise products ab = 2[S((a+b)/2) - S(a/2) - S(b/2)] for every pair in
// lockstep; values are six-term expressions over the new top.
GadgetOut appendProduct2Batch(NetBuilder& b,
                              const std::vector<std::pair<Aff, Aff>>& pairs,
                              int t, const std::vector<Chan>& keep,
                              const std::vector<Aff>& extraLin) {
  std::vector<Aff> srcs;
  srcs.reserve(pairs.size() * 3);
  for (const auto& [a, c] : pairs) {
    srcs.push_back(a.plus(c).scaled(0.5));
    srcs.push_back(a.scaled(0.5));
    srcs.push_back(c.scaled(0.5));
  }
  GadgetOut sq = appendSquareBatch(b, srcs, t, keep, extraLin, true);
  GadgetOut out;
  out.kept = std::move(sq.kept);
  out.extra = std::move(sq.extra);
  out.values.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.values.push_back(sq.values[3 * i]
                             .minus(sq.values[3 * i + 1])
                             .minus(sq.values[3 * i + 2])
                             .scaled(2.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lockstep pairwise-product trees over several independent value lists.

struct TreeItem {
  std::vector<Aff> vals;     // >= 2 entries while active (fresh over top)
  std::vector<double> errs;  // matching drift bounds
  bool single = false;       // finished; value below
  bool materialized = false;
  Chan chan;       // valid when materialized
  Aff freshVal;    // valid when single && !materialized
  double err = 0;  // final error when single
};

void settleSingles(std::vector<TreeItem>& items) {
  for (TreeItem& it : items) {
    if (!it.single && it.vals.size() == 1) {
      it.single = true;
      it.freshVal = it.vals[0];
      it.err = it.errs[0];
      it.vals.clear();
      it.errs.clear();
    }
  }
}

// Reduces every item to a single value by repeated lockstep pair levels.
// Items finishing early are materialized once and carried.
void runProductTrees(NetBuilder& b, std::vector<TreeItem>& items, int t) {
  settleSingles(items);
  auto anyActive = [&]() {
    return std::any_of(items.begin(), items.end(),
                       [](const TreeItem& it) { return !it.single; });
  };
  while (anyActive()) {
    std::vector<std::pair<Aff, Aff>> pairs;
    std::vector<Aff> extraLin;
    std::vector<Chan> keep;
    std::vector<std::size_t> pairOwner;   // item index per pair
    std::vector<std::size_t> extraOwner;  // item index per extraLin entry
    std::vector<std::size_t> keepOwner;

    for (std::size_t i = 0; i < items.size(); ++i) {
      TreeItem& it = items[i];
      if (it.single) {
        if (it.materialized) {
          keep.push_back(it.chan);
          keepOwner.push_back(i);
        } else {
          extraLin.push_back(it.freshVal);
          extraOwner.push_back(i);
        }
      } else {
        for (std::size_t j = 0; j + 1 < it.vals.size(); j += 2) {
          pairs.emplace_back(it.vals[j], it.vals[j + 1]);
          pairOwner.push_back(i);
        }
      }
    }

    GadgetOut out = appendProduct2Batch(b, pairs, t, keep, extraLin);

    for (std::size_t e = 0; e < extraOwner.size(); ++e) {
      TreeItem& it = items[extraOwner[e]];
      it.materialized = true;
      it.chan = out.extra[e];
    }
    for (std::size_t k = 0; k < keepOwner.size(); ++k) {
      items[keepOwner[k]].chan = out.kept[k];
    }
    std::size_t cursor = 0;
    for (TreeItem& it : items) {
      if (it.single) continue;
      std::vector<Aff> nextVals;
      std::vector<double> nextErrs;
      for (std::size_t j = 0; j + 1 < it.vals.size(); j += 2) {
        nextVals.push_back(out.values[cursor]);
        nextErrs.push_back(prod2Drift(t, it.errs[j], it.errs[j + 1]));
        ++cursor;
      }
      it.vals = std::move(nextVals);
      it.errs = std::move(nextErrs);
    }
    settleSingles(items);
  }
}

// Final value of a settled item as an expression over the current top.
Aff treeValue(const TreeItem& it) {
  return it.materialized ? Aff::of(it.chan) : it.freshVal;
}

// ---------------------------------------------------------------------------
// The shared cosine pipeline. One factor realizes cos(2 pi v) with
// v = frac(U (x_axis + 1) / 2), which equals sign * cos(U pi x + ...) for
// the cosine (U = n) and shifted sine (U = n - 1/2) families.

struct TrigFactor {
  int axis = 0;
  double U = 1.0;
  int J = 0;         // floor units (integer part of u ranges over [0, J])
  double sign = 1.0; // (-1)^n front factor
};

struct TrigElement {
  std::vector<TrigFactor> factors;  // non-constant axes only
  double scalar = 1.0;              // constant axes fold into this
};

struct ElementValues {
  std::vector<Aff> values;        // per element, over the final top state
  std::vector<double> errs;       // total drift incl. Taylor remainders
  std::vector<double> errsNoTaylor;  // construction-only part
};

// Builds all elements in lockstep through one shared pipeline:
// floor steps -> subinterval steps -> z/C/S affines -> sawtooth square of z
// -> Horner ladders for the degree-p cosine/sine Taylor polynomials on
// [-pi/8, pi/8] -> final products, then pairwise-product trees across each
// element's factors.
ElementValues buildElements(NetBuilder& b,
                            const std::vector<TrigElement>& elems, int t,
                            int p) {
  const double y8 = std::numbers::pi / 8.0;
  const int K = p / 2;
  std::vector<double> cQ(static_cast<std::size_t>(K) + 1);
  std::vector<double> cR(static_cast<std::size_t>(K));
  for (int k = 0; k <= K; ++k) {
    cQ[static_cast<std::size_t>(k)] =
        ((k % 2) ? -1.0 : 1.0) * std::pow(y8, 2 * k) / factorial(2 * k);
  }
  for (int k = 0; k < K; ++k) {
    cR[static_cast<std::size_t>(k)] =
        ((k % 2) ? -1.0 : 1.0) * std::pow(y8, 2 * k) / factorial(2 * k + 1);
  }
  const double taylorQ = std::pow(y8, p + 2) / factorial(p + 2);
  const double taylorR = std::pow(y8, p + 1) / factorial(p + 1);

  std::vector<const TrigFactor*> fac;
  for (const TrigElement& e : elems) {
    for (const TrigFactor& f : e.factors) fac.push_back(&f);
  }
  const std::size_t nf = fac.size();

  // --- floor layer (integer part of u_f = U_f (x + 1) / 2) ---
  std::vector<Chan> xc(static_cast<std::size_t>(b.inputDim()));
  for (std::size_t j = 0; j < xc.size(); ++j) {
    xc[j] = b.input(static_cast<Eigen::Index>(j));
  }
  std::vector<std::vector<Chan>> floorChans(nf);
  const bool anyFloor =
      std::any_of(fac.begin(), fac.end(),
                  [](const TrigFactor* f) { return f->J >= 1; });
  if (anyFloor) {
    b.beginLayer(Activation::BinaryStep(), 0);
    std::vector<Chan> newXc;
    for (Chan c : xc) newXc.push_back(b.carry(c));
    for (std::size_t i = 0; i < nf; ++i) {
      const TrigFactor& f = *fac[i];
      for (int j = 1; j <= f.J; ++j) {
        floorChans[i].push_back(b.maxUnit(
            Aff::constant(0.0),
            Aff::of(b.input(f.axis), f.U / 2.0, f.U / 2.0 - j)));
      }
    }
    b.endLayer();
    xc = newXc;
  }

  // --- subinterval layer: v_f materialized, 7 threshold bits per factor ---
  b.beginLayer(Activation::BinaryStep(), b.topLayer());
  std::vector<Aff> vAff(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const TrigFactor& f = *fac[i];
    Aff v = Aff::of(xc[static_cast<std::size_t>(f.axis)], f.U / 2.0, f.U / 2.0);
    for (Chan c : floorChans[i]) v.add(c, -1.0);
    vAff[i] = v;
  }
  std::vector<Chan> vChan(nf);
  for (std::size_t i = 0; i < nf; ++i) vChan[i] = b.lin(vAff[i]);
  std::vector<std::vector<Chan>> qChans(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    for (int s = 1; s <= 7; ++s) {
      qChans[i].push_back(
          b.maxUnit(Aff::constant(0.0), shift(vAff[i].scaled(8.0), -s)));
    }
  }
  b.endLayer();

  // --- z, C, S affines; sawtooth square of z ---
  std::vector<Aff> zA(nf), cA(nf), sA(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    Aff z = Aff::of(vChan[i], 16.0, -1.0);
    for (Chan q : qChans[i]) z.add(q, -2.0);
    zA[i] = z;
    auto theta = [](int s) {
      return std::numbers::pi * (s + 0.5) / 4.0;
    };
    Aff C = Aff::constant(std::cos(theta(0)));
    Aff S = Aff::constant(std::sin(theta(0)));
    for (int s = 1; s <= 7; ++s) {
      C.add(qChans[i][static_cast<std::size_t>(s - 1)],
            std::cos(theta(s)) - std::cos(theta(s - 1)));
      S.add(qChans[i][static_cast<std::size_t>(s - 1)],
            std::sin(theta(s)) - std::sin(theta(s - 1)));
    }
    cA[i] = C;
    sA[i] = S;
  }
  std::vector<Aff> extraLin;
  for (std::size_t i = 0; i < nf; ++i) {
    extraLin.push_back(zA[i]);
    extraLin.push_back(cA[i]);
    extraLin.push_back(sA[i]);
  }
  GadgetOut sq = appendSquareBatch(b, zA, t, {}, extraLin, true);
  std::vector<Chan> zc(nf), cc(nf), sc(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    zc[i] = sq.extra[3 * i];
    cc[i] = sq.extra[3 * i + 1];
    sc[i] = sq.extra[3 * i + 2];
  }
  std::vector<Aff> wVal = sq.values;
  const double eW = eps0(t);

  // --- Horner ladders for Q(w) ~ cos(pi z / 8) and R(w) with
  //     sin(pi z / 8) ~ (pi/8) z R(z^2), all factors in lockstep ---
  std::vector<Chan> wc(nf);
  std::vector<Aff> accQ(nf), accR(nf);
  std::vector<double> eQ(nf, 0.0), eR(nf, 0.0);
  for (int lv = 1; lv <= K; ++lv) {
    std::vector<std::pair<Aff, Aff>> pairs;
    std::vector<Aff> lvExtra;
    std::vector<Chan> keep;
    if (lv == 1) {
      for (std::size_t i = 0; i < nf; ++i) {
        pairs.emplace_back(wVal[i],
                           Aff::constant(cQ[static_cast<std::size_t>(K)]));
        lvExtra.push_back(wVal[i]);
        keep.push_back(zc[i]);
        keep.push_back(cc[i]);
        keep.push_back(sc[i]);
      }
    } else {
      for (std::size_t i = 0; i < nf; ++i) {
        pairs.emplace_back(Aff::of(wc[i]), accQ[i]);
        pairs.emplace_back(Aff::of(wc[i]),
                           lv == 2 ? Aff::constant(
                                         cR[static_cast<std::size_t>(K - 1)])
                                   : accR[i]);
        keep.push_back(zc[i]);
        keep.push_back(cc[i]);
        keep.push_back(sc[i]);
        keep.push_back(wc[i]);
      }
    }
    GadgetOut out = appendProduct2Batch(b, pairs, t, keep, lvExtra);
    if (lv == 1) {
      for (std::size_t i = 0; i < nf; ++i) {
        wc[i] = out.extra[i];
        zc[i] = out.kept[3 * i];
        cc[i] = out.kept[3 * i + 1];
        sc[i] = out.kept[3 * i + 2];
        accQ[i] = shift(out.values[i], cQ[static_cast<std::size_t>(K - lv)]);
        eQ[i] = prod2Drift(t, eW, 0.0);
      }
    } else {
      for (std::size_t i = 0; i < nf; ++i) {
        zc[i] = out.kept[4 * i];
        cc[i] = out.kept[4 * i + 1];
        sc[i] = out.kept[4 * i + 2];
        wc[i] = out.kept[4 * i + 3];
        accQ[i] =
            shift(out.values[2 * i], cQ[static_cast<std::size_t>(K - lv)]);
        accR[i] =
            shift(out.values[2 * i + 1], cR[static_cast<std::size_t>(K - lv)]);
        eQ[i] = prod2Drift(t, eW, eQ[i]);
        eR[i] = prod2Drift(t, eW, lv == 2 ? 0.0 : eR[i]);
      }
    }
  }

  // --- P = z * R(w); materialize Q ---
  {
    std::vector<std::pair<Aff, Aff>> pairs;
    std::vector<Aff> lvExtra;
    std::vector<Chan> keep;
    for (std::size_t i = 0; i < nf; ++i) {
      pairs.emplace_back(Aff::of(zc[i]), accR[i]);
      lvExtra.push_back(accQ[i]);
      keep.push_back(cc[i]);
      keep.push_back(sc[i]);
    }
    GadgetOut out = appendProduct2Batch(b, pairs, t, keep, lvExtra);
    std::vector<Chan> qc(nf);
    for (std::size_t i = 0; i < nf; ++i) {
      qc[i] = out.extra[i];
      cc[i] = out.kept[2 * i];
      sc[i] = out.kept[2 * i + 1];
      accR[i] = out.values[i];  // now holds P = z R(w)
      eR[i] = prod2Drift(t, 0.0, eR[i]);
    }
    // --- final products G1 = C * Q, G2 = S * (pi/8) P ---
    std::vector<std::pair<Aff, Aff>> gp;
    for (std::size_t i = 0; i < nf; ++i) {
      gp.emplace_back(Aff::of(cc[i]), Aff::of(qc[i]));
      gp.emplace_back(Aff::of(sc[i]), accR[i].scaled(y8));
    }
    out = appendProduct2Batch(b, gp, t, {}, {});
    for (std::size_t i = 0; i < nf; ++i) {
      accQ[i] = out.values[2 * i];      // G1
      accR[i] = out.values[2 * i + 1];  // G2
    }
  }

  // Per-factor values and their drift bounds.
  std::vector<Aff> facVal(nf);
  std::vector<double> facErr(nf), facErrCons(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    facVal[i] = accQ[i].minus(accR[i]).scaled(fac[i]->sign);
    const double eCos = prod2Drift(t, 0.0, eQ[i] + taylorQ);
    const double eSin = prod2Drift(t, 0.0, y8 * eR[i] + taylorR);
    facErr[i] = eCos + eSin;
    facErrCons[i] = prod2Drift(t, 0.0, eQ[i]) + prod2Drift(t, 0.0, y8 * eR[i]);
  }

  // --- per-element product trees over the factor values ---
  std::vector<TreeItem> items(elems.size());
  std::vector<TreeItem> itemsCons(elems.size());  // construction-only errors
  std::size_t cursor = 0;
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const std::size_t cnt = elems[e].factors.size();
    if (cnt == 0) {
      // Constant element: nothing to multiply; settle it immediately so the
      // tree loop never sees an empty item.
      items[e].single = true;
      items[e].freshVal = Aff::constant(1.0);
      continue;
    }
    for (std::size_t j = 0; j < cnt; ++j) {
      items[e].vals.push_back(facVal[cursor + j]);
      items[e].errs.push_back(facErr[cursor + j]);
      itemsCons[e].errs.push_back(facErrCons[cursor + j]);
    }
    cursor += cnt;
    // Pad to a power of two with exact constant ones.
    while (items[e].vals.size() > 1 &&
           !std::has_single_bit(items[e].vals.size())) {
      items[e].vals.push_back(Aff::constant(1.0));
      items[e].errs.push_back(0.0);
      itemsCons[e].errs.push_back(0.0);
    }
  }
  // Error recursion for the construction-only variant (values unused).
  for (TreeItem& it : itemsCons) {
    std::vector<double> errs = it.errs;
    while (errs.size() > 1) {
      std::vector<double> next;
      for (std::size_t j = 0; j + 1 < errs.size(); j += 2) {
        next.push_back(prod2Drift(t, errs[j], errs[j + 1]));
      }
      errs = std::move(next);
    }
    it.err = errs.empty() ? 0.0 : errs[0];
  }
  runProductTrees(b, items, t);

  ElementValues out;
  for (std::size_t e = 0; e < elems.size(); ++e) {
    if (elems[e].factors.empty()) {
      out.values.push_back(Aff::constant(elems[e].scalar));
      out.errs.push_back(0.0);
      out.errsNoTaylor.push_back(0.0);
      continue;
    }
    const double s = std::abs(elems[e].scalar);
    out.values.push_back(treeValue(items[e]).scaled(elems[e].scalar));
    out.errs.push_back(s * items[e].err);
    out.errsNoTaylor.push_back(s * itemsCons[e].err);
  }
  return out;
}

TrigFactor makeFactor(int axis, int n, int parity) {
  TrigFactor f;
  f.axis = axis;
  if (parity == 0) {
    f.U = n;
    f.J = n;
  } else {
    f.U = n - 0.5;
    f.J = n - 1;
  }
  f.sign = (n % 2 == 0) ? 1.0 : -1.0;
  return f;
}

// A network computing the constant `value` regardless of the input
// (one zero-weight linear channel selected by a unit readout row).
MCNNetwork constantNet(Eigen::Index d, double value) {
  NetBuilder b(d, Activation::Identity());
  b.beginLayer(Activation::Identity(), 0);
  Chan c = b.lin(Aff::constant(value));
  b.endLayer();
  return b.finishFixed({Aff::of(c)});
}

std::vector<std::array<double, 2>> cube(int d, double lo, double hi) {
  return std::vector<std::array<double, 2>>(static_cast<std::size_t>(d),
                                            {lo, hi});
}

}  // namespace

// ---------------------------------------------------------------------------
// Targets.

TargetFn makeTarget(const json& descriptor) {
  if (!descriptor.is_object() || !descriptor.contains("kind")) {
    throw std::invalid_argument("makeTarget: descriptor needs a 'kind'");
  }
  const std::string kind = descriptor.at("kind").get<std::string>();
  TargetFn t;
  t.descriptor = descriptor;
  if (kind == "square") {
    t.eval = [](const Vector& x) { return x(0) * x(0); };
  } else if (kind == "product") {
    const int p = descriptor.at("p").get<int>();
    t.eval = [p](const Vector& x) {
      double v = 1.0;
      for (int i = 0; i < p; ++i) v *= x(i);
      return v;
    };
  } else if (kind == "polynomial") {
    const std::vector<double> a =
        descriptor.at("coeffs").get<std::vector<double>>();
    t.eval = [a](const Vector& x) {
      double v = 0.0, xp = 1.0;
      for (double c : a) {
        xp *= x(0);
        v += c * xp;
      }
      return v;
    };
  } else if (kind == "floor") {
    t.eval = [](const Vector& x) { return std::floor(x(0)); };
  } else if (kind == "cos") {
    const int n = descriptor.at("n").get<int>();
    t.eval = [n](const Vector& x) {
      return std::cos(n * std::numbers::pi * x(0));
    };
  } else if (kind == "sin") {
    const int n = descriptor.at("n").get<int>();
    t.eval = [n](const Vector& x) {
      return std::sin((n - 0.5) * std::numbers::pi * x(0));
    };
  } else if (kind == "basis") {
    const MultiIndex n = descriptor.at("n").get<MultiIndex>();
    const std::vector<int> parity =
        descriptor.at("parity").get<std::vector<int>>();
    t.eval = [n, parity](const Vector& x) { return evalBasis(n, parity, x); };
  } else if (kind == "series") {
    struct Term {
      double coeff;
      MultiIndex n;
      std::vector<int> parity;
    };
    std::vector<Term> terms;
    for (const json& tj : descriptor.at("terms")) {
      terms.push_back({decodeReal(tj.at("coeff"), "series.coeff"),
                       tj.at("n").get<MultiIndex>(),
                       tj.at("parity").get<std::vector<int>>()});
    }
    t.eval = [terms](const Vector& x) {
      double v = 0.0;
      for (const Term& term : terms) {
        v += term.coeff * evalBasis(term.n, term.parity, x);
      }
      return v;
    };
  } else if (kind == "zero") {
    t.eval = [](const Vector&) { return 0.0; };
  } else if (kind == "constant") {
    const double v = decodeReal(descriptor.at("value"), "constant.value");
    t.eval = [v](const Vector&) { return v; };
  } else if (kind == "cospi-prod") {
    t.eval = [](const Vector& x) {
      double v = 1.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        v *= std::cos(std::numbers::pi * x(i));
      }
      return v;
    };
  } else if (kind == "cos-mix") {
    t.eval = [](const Vector& x) {
      return std::cos(std::numbers::pi * x(0)) +
             0.5 * std::cos(2.0 * std::numbers::pi * x(0));
    };
  } else {
    throw std::invalid_argument("makeTarget: unknown kind '" + kind + "'");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Builders.

CertifiedNet buildSawtoothSquare(int m, int l) {
  requireStages(m, l);
  const int t = m * l;
  NetBuilder b(1, Activation::Identity());
  GadgetOut out =
      appendSquareBatch(b, {Aff::of(b.input(0))}, t, {}, {}, true);
  CertifiedNet c{b.finishFixed({out.values[0]}),
                 cube(1, -1.0, 1.0),
                 makeTarget({{"kind", "square"}}),
                 eps0(t),
                 "2^-(m*l) = 2^-" + std::to_string(t),
                 {m, l, 0, 0},
                 {}};
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildProduct2(int m, int l) {
  requireStages(m, l);
  const int t = m * l;
  NetBuilder b(2, Activation::Identity());
  GadgetOut out = appendProduct2Batch(
      b, {{Aff::of(b.input(0)), Aff::of(b.input(1))}}, t, {}, {});
  CertifiedNet c{b.finishFixed({out.values[0]}),
                 cube(2, -1.0, 1.0),
                 makeTarget({{"kind", "product"}, {"p", 2}}),
                 eps2(t),
                 "6 * 2^-(m*l) (three squares, each 2^-t, times the "
                 "rescale factor)",
                 {m, l, 2, 0},
                 {}};
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildProduct(int p, int m, int l) {
  requireStages(m, l);
  if (p < 2 || p > 32) {
    throw std::invalid_argument(
        "buildProduct: arity must be in [2, 32], got " + std::to_string(p));
  }
  const int t = m * l;
  NetBuilder b(p, Activation::Identity());

  TreeItem item;
  for (int i = 0; i < p; ++i) {
    item.vals.push_back(Aff::of(b.input(i)));
    item.errs.push_back(0.0);
  }
  while (!std::has_single_bit(item.vals.size())) {
    item.vals.push_back(Aff::constant(1.0));
    item.errs.push_back(0.0);
  }
  std::vector<TreeItem> items{std::move(item)};
  runProductTrees(b, items, t);

  const int levels = static_cast<int>(std::bit_width(
                         std::bit_ceil(static_cast<unsigned>(p)))) -
                     1;
  const double claim = std::ldexp(1.0, levels) * eps2(t);
  const double recursion = items[0].err;
  CertifiedNet c{b.finishFixed({treeValue(items[0])}),
                 cube(p, -1.0, 1.0),
                 makeTarget({{"kind", "product"}, {"p", p}}),
                 std::max(claim, recursion),
                 "2^ceil(log2 p) * 6 * 2^-(m*l), tree depth " +
                     std::to_string(levels),
                 {m, l, p, 0},
                 {}};
  if (recursion > claim) {
    c.deviations.push_back(
        "bound inflated to the drift-aware tree recursion value " +
        fmt(recursion));
  }
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildPolynomial(const std::vector<double>& coeffs, int m, int l) {
  requireStages(m, l);
  const int p = static_cast<int>(coeffs.size());
  if (p < 1 || p > 32) {
    throw std::invalid_argument(
        "buildPolynomial: degree must be in [1, 32], got " +
        std::to_string(p));
  }
  for (double a : coeffs) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("buildPolynomial: non-finite coefficient");
    }
  }
  const int t = m * l;
  const json desc{{"kind", "polynomial"}, {"coeffs", coeffs}};

  std::vector<int> active;  // degrees j with a_j != 0
  for (int j = 1; j <= p; ++j) {
    if (coeffs[static_cast<std::size_t>(j - 1)] != 0.0) active.push_back(j);
  }
  if (active.empty()) {
    CertifiedNet c{constantNet(1, 0.0), cube(1, -1.0, 1.0), makeTarget(desc),
                   kUlpSlack,           "ulp (zero polynomial)",
                   {m, l, p, 0},        {}};
    c.stageParams.width = c.net.maxStateDim();
    return c;
  }

  NetBuilder b(1, Activation::Identity());
  int imax = 0;
  for (int j : active) {
    imax = std::max(imax, 31 - static_cast<int>(std::countl_zero(
                               static_cast<unsigned>(j))));
  }

  // Power ladder x^(2^i), each entry materialized as a channel.
  std::vector<Chan> ladder(static_cast<std::size_t>(imax) + 1);
  ladder[0] = b.input(0);
  Aff pending;  // value of the last ladder entry, not yet materialized
  for (int i = 1; i <= imax; ++i) {
    std::vector<Chan> keep(ladder.begin(),
                           ladder.begin() + i - (i >= 2 ? 1 : 0));
    const std::vector<Aff> extra =
        (i >= 2) ? std::vector<Aff>{pending} : std::vector<Aff>{};
    const Aff src = (i == 1) ? Aff::of(ladder[0]) : pending;
    GadgetOut out = appendSquareBatch(b, {src}, t, keep, extra, i == 1);
    for (std::size_t k = 0; k < keep.size(); ++k) ladder[k] = out.kept[k];
    if (i >= 2) ladder[static_cast<std::size_t>(i - 1)] = out.extra[0];
    pending = out.values[0];
  }
  // Materialize the top ladder entry so every tree factor is a channel
  // (and so the net has at least one layer even for linear polynomials).
  b.beginLayer(Activation::Identity(), b.topLayer());
  std::vector<Chan> newLadder = ladder;
  for (int i = 0; i < imax; ++i) {
    newLadder[static_cast<std::size_t>(i)] =
        b.carry(ladder[static_cast<std::size_t>(i)]);
  }
  newLadder[static_cast<std::size_t>(imax)] =
      (imax >= 1) ? b.lin(pending) : b.carry(ladder[0]);
  b.endLayer();
  ladder = newLadder;
  auto ladderErr = [&](int i) {
    return (std::ldexp(1.0, i) - 1.0) * eps0(t);
  };

  // One product tree per active monomial, padded to a power of two.
  std::vector<TreeItem> items(active.size());
  std::vector<double> claimBound(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    const int j = active[a];
    double ladderPart = 0.0;
    for (int i = 0; i <= imax; ++i) {
      if ((j >> i) & 1) {
        items[a].vals.push_back(Aff::of(ladder[static_cast<std::size_t>(i)]));
        items[a].errs.push_back(ladderErr(i));
        ladderPart += ladderErr(i);
      }
    }
    const std::size_t bj = items[a].vals.size();
    while (items[a].vals.size() > 1 &&
           !std::has_single_bit(items[a].vals.size())) {
      items[a].vals.push_back(Aff::constant(1.0));
      items[a].errs.push_back(0.0);
    }
    claimBound[a] =
        ladderPart +
        (bj >= 2 ? static_cast<double>(std::bit_ceil(bj)) * eps2(t) : 0.0);
  }
  runProductTrees(b, items, t);

  Aff row = Aff::constant(0.0);
  double bound = 0.0;
  for (std::size_t a = 0; a < active.size(); ++a) {
    const double aj = coeffs[static_cast<std::size_t>(active[a] - 1)];
    row = row.plus(treeValue(items[a]).scaled(aj));
    bound += std::abs(aj) * std::max(claimBound[a], items[a].err);
  }
  CertifiedNet c{b.finishFixed({row}),
                 cube(1, -1.0, 1.0),
                 makeTarget(desc),
                 std::max(bound, kUlpSlack),
                 "sum_j |a_j| (2^ceil(log2 b_j) * 6 * 2^-t + sum_{i in "
                 "bits(j)} (2^i - 1) 2^-t)",
                 {m, l, p, 0},
                 {"per-monomial bounds summed with |a_j| weights (tighter "
                  "than the aggregate ||a||_1 form)"}};
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildFloor(long rangeMax) {
  if (rangeMax < 1 || rangeMax > 1'000'000) {
    throw std::invalid_argument(
        "buildFloor: range must be in [1, 10^6], got " +
        std::to_string(rangeMax));
  }
  NetBuilder b(1, Activation::Identity());
  b.beginLayer(Activation::BinaryStep(), 0);
  b.carry(b.input(0));
  std::vector<Chan> units;
  units.reserve(static_cast<std::size_t>(rangeMax));
  for (long j = 1; j <= rangeMax; ++j) {
    units.push_back(b.maxUnit(
        Aff::constant(0.0),
        Aff::of(b.input(0), 1.0, -static_cast<double>(j))));
  }
  b.endLayer();
  Aff row = Aff::constant(0.0);
  for (Chan u : units) row.add(u, 1.0);
  CertifiedNet c{b.finishFixed({row}),
                 {{0.0, static_cast<double>(rangeMax)}},
                 makeTarget({{"kind", "floor"}}),
                 kUlpSlack,
                 "ulp (threshold sums are exact on [0, J])",
                 {0, 0, 0, 0},
                 {"negative inputs are outside the certified domain; "
                  "range-reduction callers only produce nonnegative "
                  "arguments"}};
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildTrig(TrigKind kind, int n, int p, int m, int l) {
  requireStages(m, l);
  requireTaylorDegree(p);
  if (n < 1 || n > 64) {
    throw std::invalid_argument(
        "buildTrig: frequency must be in [1, 64], got " + std::to_string(n));
  }
  const int t = m * l;
  NetBuilder b(1, Activation::Identity());
  TrigElement elem;
  elem.factors.push_back(makeFactor(0, n, kind == TrigKind::Cos ? 0 : 1));
  ElementValues ev = buildElements(b, {elem}, t, p);

  const double construction = ev.errsNoTaylor[0];
  const double taylor = ev.errs[0] - ev.errsNoTaylor[0];
  const json desc =
      (kind == TrigKind::Cos)
          ? json{{"kind", "cos"}, {"n", n}}
          : json{{"kind", "sin"}, {"n", n}};
  CertifiedNet c{b.finishFixed({ev.values[0]}),
                 cube(1, -1.0, 1.0),
                 makeTarget(desc),
                 ev.errs[0] + kFpAllowance,
                 "taylor(" + fmt(taylor) + ") + construction(" +
                     fmt(construction) + ") + fp(1e-12)",
                 {m, l, p, 0},
                 {}};
  if (kind == TrigKind::Sin) {
    c.deviations.push_back(
        "sine family built by the same subinterval-Taylor pipeline as "
        "cosine (kernel-quotient extraction is numerically singular near 0)");
  }
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildBasisElement(const MultiIndex& n,
                               const std::vector<int>& parity, int p, int m,
                               int l) {
  requireStages(m, l);
  requireTaylorDegree(p);
  const int d = static_cast<int>(n.size());
  if (d < 1 || d > 3) {
    throw std::invalid_argument("buildBasisElement: dimension must be in [1, 3]");
  }
  if (parity.size() != n.size()) {
    throw std::invalid_argument(
        "buildBasisElement: parity length must match the index length");
  }
  TrigElement elem;
  for (int j = 0; j < d; ++j) {
    const int nj = n[static_cast<std::size_t>(j)];
    const int ij = parity[static_cast<std::size_t>(j)];
    if (nj < 0 || nj > 64 || (ij != 0 && ij != 1)) {
      throw std::invalid_argument("buildBasisElement: bad index entry");
    }
    if (nj == 0) {
      if (ij != 0) {
        throw std::invalid_argument(
            "buildBasisElement: parity must be 0 where the frequency is 0");
      }
      // Same rounding as evalBasis: multiply by the rounded 1/sqrt(2).
      elem.scalar *= 1.0 / std::numbers::sqrt2;
    } else {
      elem.factors.push_back(makeFactor(j, nj, ij));
    }
  }
  const json desc{{"kind", "basis"}, {"n", n}, {"parity", parity}};
  const int t = m * l;
  if (elem.factors.empty()) {
    CertifiedNet c{constantNet(d, elem.scalar),
                   cube(d, -1.0, 1.0),
                   makeTarget(desc),
                   kUlpSlack,
                   "ulp (constant basis element)",
                   {m, l, p, 0},
                   {}};
    c.stageParams.width = c.net.maxStateDim();
    return c;
  }
  NetBuilder b(d, Activation::Identity());
  ElementValues ev = buildElements(b, {elem}, t, p);
  CertifiedNet c{b.finishFixed({ev.values[0]}),
                 cube(d, -1.0, 1.0),
                 makeTarget(desc),
                 ev.errs[0] + kFpAllowance,
                 "taylor+construction(" + fmt(ev.errs[0]) + ") + fp(1e-12)",
                 {m, l, p, 0},
                 {}};
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

CertifiedNet buildFourierApprox(const TargetFn& f, int d, int r, int p, int m,
                                int l, int quadOrder) {
  requireStages(m, l);
  requireTaylorDegree(p);
  if (d < 1 || d > 3) {
    throw std::invalid_argument(
        "buildFourierApprox: dimension must be in [1, 3]");
  }
  const int t = m * l;
  FourierIndexSet idx = hyperbolicCross(d, r);
  fourierCoeffs(f.eval, idx, quadOrder);

  json seriesTerms = json::array();
  for (const FourierTerm& term : idx.terms) {
    seriesTerms.push_back({{"coeff", encodeReal(term.coeff)},
                           {"n", term.n},
                           {"parity", term.parity}});
  }
  const json desc{{"kind", "series"}, {"terms", seriesTerms}};

  constexpr double kCoeffCutoff = 1e-14;
  double skippedMass = 0.0;
  double constBias = 0.0;
  std::vector<TrigElement> elems;
  std::vector<double> elemCoeffs;
  for (const FourierTerm& term : idx.terms) {
    const bool isConst =
        std::all_of(term.n.begin(), term.n.end(), [](int v) { return v == 0; });
    if (std::abs(term.coeff) < kCoeffCutoff) {
      skippedMass += std::abs(term.coeff);
      continue;
    }
    if (isConst) {
      double basisConst = 1.0;
      for (int j = 0; j < d; ++j) basisConst *= 1.0 / std::numbers::sqrt2;
      constBias += term.coeff * basisConst;
      continue;
    }
    TrigElement elem;
    for (int j = 0; j < d; ++j) {
      const int nj = term.n[static_cast<std::size_t>(j)];
      if (nj == 0) {
        elem.scalar *= 1.0 / std::numbers::sqrt2;
      } else {
        elem.factors.push_back(
            makeFactor(j, nj, term.parity[static_cast<std::size_t>(j)]));
      }
    }
    elems.push_back(std::move(elem));
    elemCoeffs.push_back(term.coeff);
  }

  std::vector<std::string> deviations{
      "bound certifies the distance to the truncated series; truncation "
      "error of the series itself depends on unknown smoothness and is "
      "informational only",
      "coefficients below 1e-14 are not wired; their mass (" +
          fmt(skippedMass) + ") is added to the bound"};

  if (elems.empty()) {
    CertifiedNet c{constantNet(d, constBias),
                   cube(d, -1.0, 1.0),
                   makeTarget(desc),
                   skippedMass + kUlpSlack,
                   "skipped coefficient mass + ulp",
                   {m, l, p, 0},
                   std::move(deviations)};
    c.stageParams.width = c.net.maxStateDim();
    return c;
  }

  NetBuilder b(d, Activation::Identity());
  ElementValues ev = buildElements(b, elems, t, p);
  Aff row = Aff::constant(constBias);
  double bound = skippedMass + kFpAllowance;
  for (std::size_t e = 0; e < elems.size(); ++e) {
    row = row.plus(ev.values[e].scaled(elemCoeffs[e]));
    bound += std::abs(elemCoeffs[e]) * ev.errs[e];
  }
  CertifiedNet c{b.finishFixed({row}),
                 cube(d, -1.0, 1.0),
                 makeTarget(desc),
                 bound,
                 "sum_k |c_k| elem_err_k + skipped(" + fmt(skippedMass) +
                     ") + fp(1e-12)",
                 {m, l, p, 0},
                 std::move(deviations)};
  c.stageParams.width = c.net.maxStateDim();
  return c;
}

// ---------------------------------------------------------------------------
// Certificate (de)serialization.

json certifiedNetToJson(const CertifiedNet& cnet) {
  json doc = networkToJson(cnet.net);
  json cert;
  cert["target"] = cnet.target.descriptor;
  json domain = json::array();
  for (const auto& axis : cnet.domain) {
    domain.push_back({encodeReal(axis[0]), encodeReal(axis[1])});
  }
  cert["domain"] = std::move(domain);
  cert["bound"] = encodeReal(cnet.bound);
  cert["bound_formula"] = cnet.boundFormula;
  cert["stage_params"] = {{"m", cnet.stageParams.m},
                          {"l", cnet.stageParams.l},
                          {"p", cnet.stageParams.p},
                          {"width", cnet.stageParams.width}};
  cert["deviations"] = cnet.deviations;
  doc["certificate"] = std::move(cert);
  return doc;
}

CertifiedNet certifiedNetFromJson(const json& j) {
  if (!j.contains("certificate")) {
    throw std::runtime_error("certificate JSON: missing 'certificate' object");
  }
  const json& cert = j.at("certificate");
  CertifiedNet c{networkFromJson(j),
                 {},
                 makeTarget(cert.at("target")),
                 decodeReal(cert.at("bound"), "certificate.bound"),
                 cert.at("bound_formula").get<std::string>(),
                 {},
                 {}};
  for (const json& axis : cert.at("domain")) {
    c.domain.push_back({decodeReal(axis.at(0), "certificate.domain.lo"),
                        decodeReal(axis.at(1), "certificate.domain.hi")});
  }
  const json& sp = cert.at("stage_params");
  c.stageParams.m = sp.at("m").get<int>();
  c.stageParams.l = sp.at("l").get<int>();
  c.stageParams.p = sp.at("p").get<int>();
  c.stageParams.width = sp.at("width").get<long>();
  if (cert.contains("deviations")) {
    c.deviations = cert.at("deviations").get<std::vector<std::string>>();
  }
  return c;
}

}  // namespace mcn
