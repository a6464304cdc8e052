#pragma once

// Slow reference implementations used as test oracles. None of them share
// code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

struct Counts {
  std::size_t s = 0, i = 0, d = 0;
  std::size_t dist() const { return s + i + d; }
  bool operator<(const Counts& o) const {
    return std::make_tuple(dist(), i + d, s, i, d) < std::make_tuple(o.dist(), o.i + o.d, o.s, o.i, o.d);
  }
  bool operator==(const Counts& o) const { return s == o.s && i == o.i && d == o.d; }
};

using Words = std::vector<std::string>;

// Enumerates every alignment path and keeps the lexicographically smallest
// (errors, insertions + deletions).
inline Counts exhaustive_alignment(const Words& ref, const Words& hyp) {
  Counts best{0, 0, ref.size() + hyp.size() + 1};
  bool have = false;
  std::function<void(std::size_t, std::size_t, Counts)> walk = [&](std::size_t r, std::size_t h, Counts c) {
    if (r == ref.size() && h == hyp.size()) {
      if (!have || c < best) best = c;
      have = true;
      return;
    }
    if (r < ref.size() && h < hyp.size()) {
      Counts n = c;
      if (ref[r] != hyp[h]) ++n.s;
      walk(r + 1, h + 1, n);
    }
    if (r < ref.size()) {
      Counts n = c;
      ++n.d;
      walk(r + 1, h, n);
    }
    if (h < hyp.size()) {
      Counts n = c;
      ++n.i;
      walk(r, h + 1, n);
    }
  };
  walk(0, 0, {});
  return best;
}

// Full-matrix Levenshtein with the same lexicographic tie rule, written
// forward over (ref, hyp) prefixes with memoization.
inline Counts memo_alignment(const Words& ref, const Words& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<Counts>> t(n + 1, std::vector<Counts>(m + 1));
  std::vector<std::vector<bool>> done(n + 1, std::vector<bool>(m + 1, false));
  std::function<Counts(std::size_t, std::size_t)> f = [&](std::size_t r, std::size_t h) -> Counts {
    if (done[r][h]) return t[r][h];
    Counts best;
    if (r == n) {
      best = {0, m - h, 0};
    } else if (h == m) {
      best = {0, 0, n - r};
    } else {
      Counts a = f(r + 1, h + 1);
      if (ref[r] != hyp[h]) ++a.s;
      Counts b = f(r + 1, h);
      ++b.d;
      Counts c = f(r, h + 1);
      ++c.i;
      best = std::min({a, b, c});
    }
    done[r][h] = true;
    return t[r][h] = best;
  };
  return f(0, 0);
}

// Minimum over all pairings after padding with empty streams.
inline Counts brute_force_cpwer(std::vector<Words> refs, std::vector<Words> hyps) {
  const std::size_t n = std::max(refs.size(), hyps.size());
  refs.resize(n);
  hyps.resize(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Counts best;
  bool have = false;
  do {
    Counts total;
    for (std::size_t r = 0; r < n; ++r) {
      const Counts c = memo_alignment(refs[r], hyps[perm[r]]);
      total.s += c.s;
      total.i += c.i;
      total.d += c.d;
    }
    if (!have || total < best) best = total;
    have = true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct Interval {
  double start, end;
};

// Partition of indices into connected components of the link relation
// max(starts) - min(ends) < gap, via repeated expansion.
inline std::set<std::set<std::size_t>> closure_groups(const std::vector<Interval>& segs, double gap) {
  const std::size_t n = segs.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      reach[a][b] = a == b || std::max(segs[a].start, segs[b].start) - std::min(segs[a].end, segs[b].end) < gap;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (reach[a][k] && reach[k][b]) reach[a][b] = true;
  std::set<std::set<std::size_t>> out;
  for (std::size_t a = 0; a < n; ++a) {
    std::set<std::size_t> g;
    for (std::size_t b = 0; b < n; ++b)
      if (reach[a][b]) g.insert(b);
    out.insert(g);
  }
  return out;
}

// Magnitude of the DTFT of x at frequency f (Hz), normalized so a unit sine
// spanning the whole buffer reads ~0.5 * window mean.
inline double dtft_magnitude(const std::vector<double>& x, double f, int rate, bool hann = true) {
  std::complex<double> acc = 0.0;
  const std::size_t n = x.size();
  double wsum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = hann ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / (n - 1)) : 1.0;
    wsum += w;
    acc += w * x[k] * std::polar(1.0, -2.0 * std::numbers::pi * f * k / rate);
  }
  return 2.0 * std::abs(acc) / wsum;
}

inline std::vector<double> direct_convolution(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> y(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
  return y;
}

inline std::vector<double> sine(double f, int rate, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = amp * std::sin(2.0 * std::numbers::pi * f * k / rate);
  return x;
}

}  // namespace oracle
