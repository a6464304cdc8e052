#include "convsynth/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "convsynth/rng.hpp"

namespace convsynth::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

double kaiser_beta(double attenuation_db) {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db >= 21.0)
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
  return 0.0;
}

// Kaiser window evaluated at x in [-1, 1].
double kaiser(double x, double beta) {
  if (std::abs(x) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

// Filter length (in samples at the rate `transition` is normalized to) that
// meets `attenuation_db` over a transition band of `transition` cycles/sample.
double kaiser_length(double attenuation_db, double transition) {
  return (attenuation_db - 7.95) / (2.285 * 2.0 * kPi * transition);
}

// Windowed-sinc kernel of the resampler for a single fractional phase.
class ResampleKernel {
 public:
  ResampleKernel(int source, int target) {
    const double min_rate = std::min(source, target);
    const double cutoff = 0.475 * min_rate / source;
    const double transition = 0.05 * min_rate / source;
    constexpr double attenuation = 80.0;
    beta_ = kaiser_beta(attenuation);
    fc_ = cutoff;
    half_ = static_cast<std::int64_t>(std::ceil(kaiser_length(attenuation, transition) / 2.0)) + 1;
  }

  std::int64_t half_width() const { return half_; }

  // taps[j] multiplies x[base - half + 1 + j] for an output at input time base + frac.
  void taps(double frac, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(2 * half_));
    double sum = 0.0;
    for (std::int64_t j = 0; j < 2 * half_; ++j) {
      const double tau = frac + static_cast<double>(half_ - 1 - j);
      const double v = 2.0 * fc_ * sinc(2.0 * fc_ * tau) * kaiser(tau / half_, beta_);
      out[static_cast<std::size_t>(j)] = v;
      sum += v;
    }
    for (double& v : out) v /= sum;
  }

 private:
  double fc_ = 0.5;
  double beta_ = 0.0;
  std::int64_t half_ = 1;
};

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> convolve_direct(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> y(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += ai * b[j];
  }
  return y;
}

std::vector<double> convolve_fft(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t out_len = a.size() + b.size() - 1;
  std::size_t n = 1;
  while (n < out_len) n <<= 1;
  const std::size_t bins = n / 2 + 1;

  double* ra = fftw_alloc_real(n);
  double* rb = fftw_alloc_real(n);
  fftw_complex* ca = fftw_alloc_complex(bins);
  fftw_complex* cb = fftw_alloc_complex(bins);
  fftw_plan pa, pb, pinv;
  {
    std::lock_guard lock(fftw_plan_mutex());
    const int ni = static_cast<int>(n);
    pa = fftw_plan_dft_r2c_1d(ni, ra, ca, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(ni, rb, cb, FFTW_ESTIMATE);
    pinv = fftw_plan_dft_c2r_1d(ni, ca, ra, FFTW_ESTIMATE);
  }
  std::fill(ra, ra + n, 0.0);
  std::fill(rb, rb + n, 0.0);
  std::copy(a.begin(), a.end(), ra);
  std::copy(b.begin(), b.end(), rb);
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = ca[k][0] * cb[k][0] - ca[k][1] * cb[k][1];
    const double im = ca[k][0] * cb[k][1] + ca[k][1] * cb[k][0];
    ca[k][0] = re;
    ca[k][1] = im;
  }
  fftw_execute(pinv);
  std::vector<double> y(out_len);
  const double norm = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < out_len; ++i) y[i] = ra[i] * norm;
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(pinv);
  }
  fftw_free(ra);
  fftw_free(rb);
  fftw_free(ca);
  fftw_free(cb);
  return y;
}

void check_position(const std::array<double, 3>& p, const std::array<double, 3>& dims,
                    const char* what) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dims[i]))
      throw std::invalid_argument(std::string(what) + " position is not strictly inside the room");
  }
}

double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0 || clip.sample_rate <= 0)
    throw std::invalid_argument("sample rates must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const auto source = static_cast<std::int64_t>(clip.sample_rate);
  const auto target = static_cast<std::int64_t>(target_rate);
  const std::int64_t g = std::gcd(source, target);
  const std::int64_t up = target / g;
  const std::int64_t down = source / g;

  const auto n = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t out_len = (n * target + source / 2) / source;

  const ResampleKernel kernel(clip.sample_rate, target_rate);
  const std::int64_t half = kernel.half_width();

  constexpr std::int64_t kMaxCachedPhases = 4096;
  std::vector<std::vector<double>> table;
  if (up <= kMaxCachedPhases) {
    table.resize(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p)
      kernel.taps(static_cast<double>(p) / static_cast<double>(up), table[static_cast<std::size_t>(p)]);
  }

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  std::vector<double> scratch;
  for (std::int64_t m = 0; m < out_len; ++m) {
    const std::int64_t pos = m * down;
    const std::int64_t base = pos / up;
    const std::int64_t phase = pos % up;
    const std::vector<double>* taps;
    if (!table.empty()) {
      taps = &table[static_cast<std::size_t>(phase)];
    } else {
      kernel.taps(static_cast<double>(phase) / static_cast<double>(up), scratch);
      taps = &scratch;
    }
    const std::int64_t first = base - half + 1;
    const std::int64_t j0 = std::max<std::int64_t>(0, -first);
    const std::int64_t j1 = std::min<std::int64_t>(2 * half, n - first);
    double acc = 0.0;
    for (std::int64_t j = j0; j < j1; ++j)
      acc += (*taps)[static_cast<std::size_t>(j)] * clip.samples[static_cast<std::size_t>(first + j)];
    out.samples[static_cast<std::size_t>(m)] = acc;
  }
  peak_guard(out);
  return out;
}

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

MixResult mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db, NoiseFit fit) {
  if (signal.sample_rate != noise.sample_rate)
    throw std::invalid_argument("signal and noise sample rates differ");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
  const std::size_t n = signal.samples.size();
  if (noise.samples.empty()) throw std::runtime_error("zero power noise");

  std::vector<double> fitted(n);
  if (noise.samples.size() >= n) {
    std::copy_n(noise.samples.begin(), n, fitted.begin());
  } else if (fit == NoiseFit::loop) {
    for (std::size_t i = 0; i < n; ++i) fitted[i] = noise.samples[i % noise.samples.size()];
  } else {
    throw std::invalid_argument("noise shorter than signal");
  }

  const double ps = mean_power(signal.samples);
  if (ps <= 0.0) throw std::runtime_error("zero power signal");
  const double pn = mean_power(fitted);
  if (pn <= 0.0) throw std::runtime_error("zero power noise");

  MixResult r;
  r.noise_scale = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  r.mixture.sample_rate = signal.sample_rate;
  r.mixture.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    r.mixture.samples[i] = signal.samples[i] + r.noise_scale * fitted[i];
  r.peak_scale = peak_guard(r.mixture);
  return r;
}

FirFilter design_lowpass(double cutoff_hz, double transition_hz, double attenuation_db,
                         int sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (!(transition_hz > 0.0) || !(attenuation_db > 0.0) || !(cutoff_hz - transition_hz / 2 > 0.0) ||
      !(cutoff_hz + transition_hz < sample_rate / 2.0))
    throw std::invalid_argument("infeasible filter spec");

  const double fs = sample_rate;
  auto len = static_cast<std::size_t>(std::ceil(kaiser_length(attenuation_db, transition_hz / fs))) + 1;
  if (len % 2 == 0) ++len;
  const double beta = kaiser_beta(attenuation_db);
  const double fc = cutoff_hz / fs;
  const double center = static_cast<double>(len / 2);

  FirFilter f;
  f.design = {cutoff_hz, transition_hz, attenuation_db, sample_rate};
  f.taps.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) - center;
    f.taps[i] = 2.0 * fc * sinc(2.0 * fc * t) * kaiser(t / center, beta);
  }
  const double sum = std::accumulate(f.taps.begin(), f.taps.end(), 0.0);
  for (double& v : f.taps) v /= sum;
  return f;
}

FirFilter design_highpass(double cutoff_hz, double transition_hz, double attenuation_db,
                          int sample_rate) {
  FirFilter f = design_lowpass(cutoff_hz, transition_hz, attenuation_db, sample_rate);
  for (double& v : f.taps) v = -v;
  f.taps[f.group_delay()] += 1.0;
  return f;
}

AudioClip apply_fir(const AudioClip& clip, const FirFilter& filter) {
  if (filter.taps.empty() || filter.taps.size() % 2 == 0)
    throw std::invalid_argument("FIR filter must have an odd number of taps");
  if (filter.design.sample_rate != 0 && filter.design.sample_rate != clip.sample_rate)
    throw std::invalid_argument("filter designed for a different sample rate");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  if (clip.samples.empty()) return out;
  const auto full = convolve_raw(clip.samples, filter.taps);
  const std::size_t d = filter.group_delay();
  out.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(d),
                     full.begin() + static_cast<std::ptrdiff_t>(d + clip.samples.size()));
  peak_guard(out);
  return out;
}

AudioClip telephone_bandlimit(const AudioClip& clip, bool highpass) {
  AudioClip out = clip;
  if (highpass) out = apply_fir(out, design_highpass(300.0, 150.0, 60.0, clip.sample_rate));
  return apply_fir(out, design_lowpass(3400.0, 300.0, 60.0, clip.sample_rate));
}

TrimResult trim_silence(const AudioClip& clip, const VadParams& params) {
  if (!(params.hop_ms > 0.0) || params.frame_ms < params.hop_ms)
    throw std::invalid_argument("VAD requires frame_ms >= hop_ms > 0");
  if (params.hangover_frames < 0) throw std::invalid_argument("hangover_frames must be >= 0");
  const double sr = clip.sample_rate;
  const auto frame = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(params.frame_ms * sr / 1000.0)));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(params.hop_ms * sr / 1000.0)));
  const std::size_t n = clip.samples.size();
  if (n < frame) throw std::invalid_argument("clip shorter than one VAD frame");

  const std::size_t frames = 1 + (n - frame + hop - 1) / hop;
  std::vector<double> energy(frames, 0.0);
  double max_energy = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t b = f * hop;
    const std::size_t e = std::min(n, b + frame);
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) acc += clip.samples[i] * clip.samples[i];
    energy[f] = acc / static_cast<double>(frame);
    max_energy = std::max(max_energy, energy[f]);
  }
  if (max_energy <= 0.0) throw std::runtime_error("no speech detected");

  const double threshold = max_energy * std::pow(10.0, params.energy_floor_db / 10.0);
  std::size_t first = frames, last = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (energy[f] > 0.0 && energy[f] >= threshold) {
      first = std::min(first, f);
      last = f;
    }
  }
  const auto hang = static_cast<std::size_t>(params.hangover_frames);
  const std::size_t begin = (first > hang ? first - hang : 0) * hop;
  const std::size_t end = std::min(n, (last + hang) * hop + frame);

  TrimResult r;
  r.clip.sample_rate = clip.sample_rate;
  r.clip.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                        clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
  r.trimmed_lead = static_cast<double>(begin) / sr;
  r.trimmed_tail = static_cast<double>(n - end) / sr;
  return r;
}

void check_room(const RoomSpec& room) {
  for (double d : room.dimensions)
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("room dimensions must be positive");
  if (!(room.absorption > 0.0 && room.absorption <= 1.0))
    throw std::invalid_argument("absorption must lie in (0, 1]");
  if (room.max_order < 0) throw std::invalid_argument("max_order must be >= 0");
  if (!(room.speed_of_sound > 0.0)) throw std::invalid_argument("speed of sound must be positive");
  if (!(room.highpass_hz >= 0.0)) throw std::invalid_argument("RIR high-pass cutoff must be >= 0");
  check_position(room.source, room.dimensions, "source");
  check_position(room.mic, room.dimensions, "mic");
  if (distance(room.source, room.mic) < 1e-9)
    throw std::invalid_argument("degenerate geometry: source and mic coincide");
}

AudioClip generate_rir(const RoomSpec& room, int sample_rate) {
  check_room(room);
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");

  const double beta = std::sqrt(1.0 - room.absorption);
  const int order = room.max_order;
  std::vector<double> beta_pow(static_cast<std::size_t>(2 * order + 3), 0.0);
  beta_pow[0] = 1.0;
  for (std::size_t k = 1; k < beta_pow.size(); ++k) beta_pow[k] = beta_pow[k - 1] * beta;

  struct Tap {
    std::size_t index;
    double amplitude;
    bool direct;
  };
  std::vector<Tap> taps;
  std::size_t length = 0;
  const double scale = sample_rate / room.speed_of_sound;
  const auto& L = room.dimensions;
  const auto& s = room.source;
  const auto& m = room.mic;

  for (int nx = -order; nx <= order; ++nx) {
    for (int qx = 0; qx <= 1; ++qx) {
      const int rx = std::abs(nx - qx) + std::abs(nx);
      if (rx > order) continue;
      const double dx = (1 - 2 * qx) * s[0] + 2.0 * nx * L[0] - m[0];
      for (int ny = -order; ny <= order; ++ny) {
        for (int qy = 0; qy <= 1; ++qy) {
          const int ry = std::abs(ny - qy) + std::abs(ny);
          if (rx + ry > order) continue;
          const double dy = (1 - 2 * qy) * s[1] + 2.0 * ny * L[1] - m[1];
          for (int nz = -order; nz <= order; ++nz) {
            for (int qz = 0; qz <= 1; ++qz) {
              const int rz = std::abs(nz - qz) + std::abs(nz);
              const int reflections = rx + ry + rz;
              if (reflections > order) continue;
              const double gain = beta_pow[static_cast<std::size_t>(reflections)];
              if (gain == 0.0) continue;
              const double dz = (1 - 2 * qz) * s[2] + 2.0 * nz * L[2] - m[2];
              const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
              const auto idx = static_cast<std::size_t>(std::lround(d * scale));
              taps.push_back({idx, gain / (4.0 * kPi * d), reflections == 0});
              length = std::max(length, idx + 1);
            }
          }
        }
      }
    }
  }

  AudioClip rir;
  rir.sample_rate = sample_rate;
  rir.samples.assign(length, 0.0);
  // Accumulate in a fixed order so the result does not depend on summation grouping.
  std::sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) {
    return a.index != b.index ? a.index < b.index : a.amplitude > b.amplitude;
  });
  AudioClip direct = rir;
  bool echoes = false;
  for (const auto& t : taps) {
    if (t.direct)
      direct.samples[t.index] += t.amplitude;
    else
      rir.samples[t.index] += t.amplitude, echoes = true;
  }
  if (echoes && room.highpass_hz > 0.0) {
    if (room.highpass_hz >= 0.25 * sample_rate) throw std::invalid_argument("RIR high-pass cutoff too high");
    rir = apply_fir(rir, design_highpass(room.highpass_hz, room.highpass_hz, 60.0, sample_rate));
  }
  for (std::size_t i = 0; i < rir.size(); ++i) rir.samples[i] += direct.samples[i];
  peak_guard(rir);
  return rir;
}

RoomSpec random_room(Rng& rng, int max_order) {
  RoomSpec room;
  room.dimensions = {rng.uniform(3.0, 8.0), rng.uniform(3.0, 8.0), rng.uniform(2.5, 4.0)};
  room.absorption = rng.uniform(0.2, 0.6);
  room.max_order = max_order;
  auto place = [&] {
    std::array<double, 3> p{};
    for (int i = 0; i < 3; ++i) p[i] = rng.uniform(0.5, room.dimensions[i] - 0.5);
    return p;
  };
  room.source = place();
  do {
    room.mic = place();
  } while (distance(room.source, room.mic) < 0.5);
  return room;
}

double sabine_rt60(const RoomSpec& room) {
  const auto& d = room.dimensions;
  const double volume = d[0] * d[1] * d[2];
  const double surface = 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
  return 0.161 * volume / (surface * room.absorption);
}

double schroeder_rt60(const AudioClip& rir) {
  const std::size_t n = rir.samples.size();
  if (n < 2) throw std::invalid_argument("impulse response too short");
  std::vector<double> edc(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += rir.samples[i] * rir.samples[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("impulse response has no energy");

  std::vector<double> db(n);
  for (std::size_t i = 0; i < n; ++i) db[i] = 10.0 * std::log10(std::max(edc[i] / acc, 1e-300));

  auto first_below = [&](double level) {
    for (std::size_t i = 0; i < n; ++i)
      if (db[i] <= level) return i;
    return n;
  };
  const std::size_t i0 = first_below(-5.0);
  std::size_t i1 = first_below(-25.0);
  if (i1 == n) i1 = first_below(-15.0);
  if (i0 == n || i1 == n || i1 <= i0 + 1)
    throw std::runtime_error("decay curve does not span the fitting range");

  // Least-squares slope of level (dB) against time.
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double count = static_cast<double>(i1 - i0 + 1);
  for (std::size_t i = i0; i <= i1; ++i) {
    const double t = static_cast<double>(i) / rir.sample_rate;
    st += t;
    sy += db[i];
    stt += t * t;
    sty += t * db[i];
  }
  const double slope = (count * sty - st * sy) / (count * stt - st * st);
  if (!(slope < 0.0)) throw std::runtime_error("decay curve is not decreasing");
  return -60.0 / slope;
}

std::vector<double> convolve_raw(const std::vector<double>& a, const std::vector<double>& b,
                                 ConvolutionMethod method) {
  if (a.empty() || b.empty()) return {};
  if (method == ConvolutionMethod::automatic) {
    const std::size_t shorter = std::min(a.size(), b.size());
    method = (shorter <= 64 || a.size() * b.size() <= (1u << 18)) ? ConvolutionMethod::direct
                                                                  : ConvolutionMethod::fft;
  }
  return method == ConvolutionMethod::direct ? convolve_direct(a, b) : convolve_fft(a, b);
}

AudioClip convolve(const AudioClip& clip, const AudioClip& rir, ConvolutionMethod method) {
  if (clip.sample_rate != rir.sample_rate)
    throw std::invalid_argument("convolution inputs have different sample rates");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples = convolve_raw(clip.samples, rir.samples, method);
  peak_guard(out);
  return out;
}

AudioClip mixdown(const std::vector<AudioClip>& channels) {
  if (channels.empty()) throw std::invalid_argument("mixdown of zero channels");
  AudioClip out;
  out.sample_rate = channels.front().sample_rate;
  out.samples.assign(channels.front().samples.size(), 0.0);
  for (const auto& c : channels) {
    if (c.sample_rate != out.sample_rate || c.samples.size() != out.samples.size())
      throw std::invalid_argument("mixdown channels differ in rate or length");
    for (std::size_t i = 0; i < c.samples.size(); ++i) out.samples[i] += c.samples[i];
  }
  const double inv = 1.0 / static_cast<double>(channels.size());
  for (double& s : out.samples) s *= inv;
  return out;
}

}  // namespace convsynth::dsp
