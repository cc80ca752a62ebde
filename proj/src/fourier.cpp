//====== fourier.cpp — field operations and the shared FFT engine ===========

#include "speclab/fourier.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace speclab {

//====== FFT engine ==========================================================
// FFTW plans are cached per (size, direction).  FFTW_ESTIMATE keeps planning
// deterministic.  Plan creation is not thread safe; guarded by a mutex.

namespace {

class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine e;
    return e;
  }

  // In-place transform of a; sign = FFTW_FORWARD or FFTW_BACKWARD; raw sums
  // (no normalization).
  void transform(Vec& a, int sign) {
    const int n = static_cast<int>(a.size());
    fftw_plan plan = nullptr;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto key = std::make_pair(n, sign);
      auto it = plans_.find(key);
      if (it == plans_.end()) {
        // Plan on a scratch buffer so the caller's data is untouched by
        // planning; FFTW_ESTIMATE does not overwrite anyway, but be safe.
        scratch_.resize(n);
        plan = fftw_plan_dft_1d(
            n, reinterpret_cast<fftw_complex*>(scratch_.data()),
            reinterpret_cast<fftw_complex*>(scratch_.data()), sign,
            FFTW_ESTIMATE);
        plans_[key] = plan;
      } else {
        plan = it->second;
      }
    }
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(a.data()),
                     reinterpret_cast<fftw_complex*>(a.data()));
  }

 private:
  FftEngine() = default;
  ~FftEngine() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
  std::vector<cplx> scratch_;
};

}  // namespace

Vec dft_coeffs(const Vec& grid_vals) {
  Vec a = grid_vals;
  FftEngine::instance().transform(a, FFTW_FORWARD);
  a /= static_cast<double>(a.size());
  return a;
}

Vec idft_values(const Vec& coeff_bins) {
  Vec a = coeff_bins;
  FftEngine::instance().transform(a, FFTW_BACKWARD);
  return a;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

Vec grid_values(const Field& u, int P) {
  if (P < 2 * u.K + 1)
    throw std::invalid_argument("grid_values: grid too small for truncation");
  Vec bins = Vec::Zero(P);
  for (int k = -u.K; k <= u.K; ++k) {
    int m = ((k % P) + P) % P;
    bins(m) += u.c(k + u.K);
  }
  return idft_values(bins);
}

Field field_from_grid(const Vec& v, int K) {
  const int P = static_cast<int>(v.size());
  if (P < 2 * K + 1)
    throw std::invalid_argument("field_from_grid: grid too small");
  Vec bins = dft_coeffs(v);
  Field u(K);
  for (int k = -K; k <= K; ++k) u.c(k + K) = bins(((k % P) + P) % P);
  return u;
}

//====== construction ========================================================

Field plane_wave(int K, int k, cplx a) {
  Field u(K);
  u.set(k, a);
  return u;
}

Field random_field(int K, double s, double target_norm, std::mt19937_64& rng) {
  Field u(K);
  for (int k = -K; k <= K; ++k)
    u.c(k + K) = randn_cplx(rng) / std::pow(jb(k), s + 1.0);
  const double n = sobolev_norm(u, s);
  if (n > 0.0) u.c *= target_norm / n;
  return u;
}

Field resize(const Field& u, int K_new) {
  Field v(K_new);
  const int r = std::min(u.K, K_new);
  for (int k = -r; k <= r; ++k) v.c(k + K_new) = u.c(k + u.K);
  return v;
}

//====== functionals =========================================================

double sobolev_norm(const Field& u, double s) {
  double acc = 0.0;
  for (int k = -u.K; k <= u.K; ++k)
    acc += std::pow(jb(k), 2.0 * s) * std::norm(u.c(k + u.K));
  return std::sqrt(acc);
}

double mass(const Field& u) { return u.c.squaredNorm(); }

double momentum(const Field& u) {
  double acc = 0.0;
  for (int k = -u.K; k <= u.K; ++k) acc -= k * std::norm(u.c(k + u.K));
  return acc;
}

ModeSplit split_modes(const Field& z) {
  if (z.K < 1) throw std::invalid_argument("split_modes: K >= 1 required");
  ModeSplit out{Field(z.K), z};
  out.tangential.set(1, z.at(1));
  out.tangential.set(-1, z.at(-1));
  out.normal.set(1, 0.0);
  out.normal.set(-1, 0.0);
  return out;
}

//====== symmetry actions and calculus ======================================

Field translate(const Field& u, double sigma) {
  Field v = u;
  for (int k = -u.K; k <= u.K; ++k)
    v.c(k + u.K) *= std::exp(I * (static_cast<double>(k) * sigma));
  return v;
}

Field gauge(const Field& u, double theta) {
  Field v = u;
  v.c *= std::exp(I * theta);
  return v;
}

Field x_derivative(const Field& u) {
  Field v = u;
  for (int k = -u.K; k <= u.K; ++k)
    v.c(k + u.K) *= I * static_cast<double>(k);
  return v;
}

Field conj_field(const Field& u) {
  Field v(u.K);
  for (int k = -u.K; k <= u.K; ++k) v.c(k + u.K) = std::conj(u.c(-k + u.K));
  return v;
}

Field operator+(const Field& a, const Field& b) {
  if (a.K != b.K) {
    const int K = std::max(a.K, b.K);
    Field r = resize(a, K);
    r.c += resize(b, K).c;
    return r;
  }
  Field r = a;
  r.c += b.c;
  return r;
}

Field operator-(const Field& a, const Field& b) {
  return a + (cplx(-1.0, 0.0) * b);
}

Field operator*(cplx s, const Field& a) {
  Field r = a;
  r.c *= s;
  return r;
}

//====== products ============================================================

Field product(const Field& a, const Field& b) {
  const int Kout = a.K + b.K;
  const int P = next_pow2(2 * Kout + 1);
  Vec va = grid_values(a, P);
  Vec vb = grid_values(b, P);
  Vec vp = va.cwiseProduct(vb);
  return field_from_grid(vp, Kout);
}

Field cubic_term(const Field& u) {
  const int K = u.K;
  const int P = next_pow2(4 * K + 2);  // alias-free for every |m| <= K
  Vec v = grid_values(u, P);
  Vec w = grid_values(x_derivative(u), P);
  Vec n(P);
  for (int i = 0; i < P; ++i) n(i) = std::norm(v(i)) * w(i);
  return field_from_grid(n, K);
}

//====== serialization =======================================================

std::string field_to_json(const Field& u) {
  nlohmann::json arr = nlohmann::json::array();
  for (int k = -u.K; k <= u.K; ++k) {
    const cplx v = u.c(k + u.K);
    if (v == cplx(0.0, 0.0)) continue;
    arr.push_back({k, v.real(), v.imag()});
  }
  return arr.dump();
}

Field field_from_json(const std::string& text, int K) {
  nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::invalid_argument("field json: not an array");
  int kmax = 1;
  for (const auto& t : arr)
    kmax = std::max(kmax, std::abs(t.at(0).get<int>()));
  if (K < 0) K = kmax;
  if (kmax > K) throw std::invalid_argument("field json: mode beyond K");
  Field u(K);
  for (const auto& t : arr)
    u.set(t.at(0).get<int>(),
          cplx(t.at(1).get<double>(), t.at(2).get<double>()));
  return u;
}

}  // namespace speclab
