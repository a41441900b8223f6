#include "arna/signal.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <numbers>
#include <stdexcept>

namespace arna {
namespace {

using cd = std::complex<double>;

// exp(-i 2 pi t / n) for t in [0, n). Each entry is computed directly from
// std::polar rather than by repeated multiplication, so there is no phase
// drift and tables are bit-identical across runs. Cached per transform size;
// std::list keeps returned references stable while the cache grows.
const std::vector<cd>& root_table(int n) {
    thread_local std::list<std::pair<int, std::vector<cd>>> cache;
    for (const auto& entry : cache)
        if (entry.first == n) return entry.second;
    std::vector<cd> roots(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
        roots[static_cast<std::size_t>(t)] =
            std::polar(1.0, -2.0 * std::numbers::pi * t / n);
    cache.emplace_back(n, std::move(roots));
    return cache.back().second;
}

int smallest_factor(int n) {
    for (int p = 2; p * p <= n; ++p)
        if (n % p == 0) return p;
    return n;
}

// Recursive mixed-radix Cooley-Tukey. `table` holds the roots of the full
// transform size `table_n`; every recursion size divides table_n, so twiddles
// are exact lookups scaled by table_n / n. Prime sizes fall back to the
// direct O(n^2) evaluation. `arena` provides scratch for the sub-transform
// results; the peak requirement along one recursion chain is < 2 * table_n.
void fft_rec(const cd* in, std::size_t stride, cd* out, int n,
             const std::vector<cd>& table, int table_n, cd* arena) {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const int scale = table_n / n;
    const int p = smallest_factor(n);
    if (p == n) {
        for (int k = 0; k < n; ++k) {
            cd acc = 0.0;
            for (int j = 0; j < n; ++j) {
                const int e = static_cast<int>(static_cast<long long>(j) * k % n);
                acc += in[static_cast<std::size_t>(j) * stride]
                       * table[static_cast<std::size_t>(e * scale)];
            }
            out[k] = acc;
        }
        return;
    }
    const int m = n / p;
    cd* sub = arena;
    for (int j = 0; j < p; ++j)
        fft_rec(in + static_cast<std::size_t>(j) * stride, stride * static_cast<std::size_t>(p),
                sub + static_cast<std::size_t>(j) * static_cast<std::size_t>(m), m, table, table_n,
                arena + n);
    for (int q = 0; q < m; ++q) {
        for (int r = 0; r < p; ++r) {
            const int k = q + r * m;
            cd acc = 0.0;
            for (int j = 0; j < p; ++j) {
                const long long e = static_cast<long long>(j) * k % n;
                acc += sub[static_cast<std::size_t>(j * m + q)]
                       * table[static_cast<std::size_t>(e) * static_cast<std::size_t>(scale)];
            }
            out[k] = acc;
        }
    }
}

void fft(const cd* in, cd* out, int n) {
    const auto& table = root_table(n);
    thread_local std::vector<cd> arena;
    if (arena.size() < 2 * static_cast<std::size_t>(n))
        arena.resize(2 * static_cast<std::size_t>(n));
    fft_rec(in, 1, out, n, table, n, arena.data());
}

}  // namespace

bool operator==(const Signal& a, const Signal& b) {
    return a.sample_rate_hz == b.sample_rate_hz && a.samples == b.samples;
}

bool is_valid_band(const FrequencyBand& band, double sample_rate_hz) {
    return band.f_min_hz >= 0.0 && band.f_min_hz <= band.f_max_hz &&
           band.f_max_hz <= sample_rate_hz / 2.0;
}

Spectrum dft(const Signal& x) {
    const int n = static_cast<int>(x.size());
    if (n == 0) throw std::invalid_argument("dft: empty signal");
    std::vector<cd> in(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
    Spectrum s;
    s.sample_rate_hz = x.sample_rate_hz;
    s.bins.resize(static_cast<std::size_t>(n));
    fft(in.data(), s.bins.data(), n);
    return s;
}

Signal idft(const Spectrum& s) {
    const int n = static_cast<int>(s.size());
    if (n == 0) throw std::invalid_argument("idft: empty spectrum");
    // Inverse via the forward transform: idft(S) = conj(fft(conj(S))) / n.
    std::vector<cd> in(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = std::conj(s.bins[static_cast<std::size_t>(i)]);
    std::vector<cd> out(static_cast<std::size_t>(n));
    fft(in.data(), out.data(), n);
    Signal x;
    x.sample_rate_hz = s.sample_rate_hz;
    x.samples.resize(static_cast<std::size_t>(n));
    double residue = 0.0;
    for (int i = 0; i < n; ++i) {
        const cd v = std::conj(out[static_cast<std::size_t>(i)]) / static_cast<double>(n);
        residue = std::max(residue, std::abs(v.imag()));
        x.samples[static_cast<std::size_t>(i)] = v.real();
    }
    if (residue > 1e-6)
        throw std::domain_error("idft: spectrum is not conjugate-symmetric (imaginary residue " +
                                std::to_string(residue) + ")");
    return x;
}

Signal passband_filter(const Signal& x, const FrequencyBand& band) {
    if (!is_valid_band(band, x.sample_rate_hz))
        throw std::invalid_argument("passband_filter: band outside [0, sample_rate/2]");
    Spectrum s = dft(x);
    const std::size_t n = s.size();
    const double df = x.sample_rate_hz / static_cast<double>(n);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double f = df * static_cast<double>(k);
        if (f >= band.f_min_hz && f <= band.f_max_hz) continue;
        s.bins[k] = 0.0;
        const std::size_t mirror = (n - k) % n;
        if (mirror != k) s.bins[mirror] = 0.0;
    }
    return idft(s);
}

FrequencyBand estimate_band(const std::vector<Signal>& signals, double power_fraction) {
    if (signals.empty()) throw std::invalid_argument("estimate_band: no signals");
    if (!(power_fraction > 0.0 && power_fraction <= 1.0))
        throw std::invalid_argument("estimate_band: power fraction must be in (0, 1]");
    const std::size_t n = signals[0].size();
    const double rate = signals[0].sample_rate_hz;
    if (n == 0) throw std::invalid_argument("estimate_band: empty signal");
    for (const Signal& sig : signals)
        if (sig.size() != n || sig.sample_rate_hz != rate)
            throw std::invalid_argument("estimate_band: signals must share length and rate");

    // One-sided power spectrum averaged over the collection; each interior
    // bin absorbs its conjugate mirror so the window accounting is physical.
    const std::size_t hi = n / 2;
    std::vector<double> power(hi + 1, 0.0);
    for (const Signal& sig : signals) {
        const Spectrum s = dft(sig);
        for (std::size_t k = 0; k <= hi; ++k) {
            double p = std::norm(s.bins[k]);
            const std::size_t mirror = (n - k) % n;
            if (mirror != k && mirror > hi) p += std::norm(s.bins[mirror]);
            power[k] += p;
        }
    }
    double total = 0.0;
    for (double p : power) total += p;
    if (total <= 0.0) throw std::domain_error("estimate_band: zero-power input");

    std::size_t peak = 0;
    for (std::size_t k = 1; k <= hi; ++k)
        if (power[k] > power[peak]) peak = k;

    std::size_t lo = peak, up = peak;
    double acc = power[peak];
    const double target = power_fraction * total;
    while (acc < target && (lo > 0 || up < hi)) {
        const double below = lo > 0 ? power[lo - 1] : -1.0;
        const double above = up < hi ? power[up + 1] : -1.0;
        if (below >= above) {
            --lo;
            acc += power[lo];
        } else {
            ++up;
            acc += power[up];
        }
    }
    // The last one-sided bin is Nyquist itself; spell it as rate / 2 rather
    // than df * (n / 2), which can land an ulp above it and fail validation.
    const double df = rate / static_cast<double>(n);
    const double f_max = up == hi ? rate / 2.0 : df * static_cast<double>(up);
    return FrequencyBand{df * static_cast<double>(lo), f_max};
}

Signal circular_shift(const Signal& x, std::size_t k) {
    const std::size_t d = x.size();
    if (k > d) throw std::invalid_argument("circular_shift: shift exceeds signal length");
    Signal out;
    out.sample_rate_hz = x.sample_rate_hz;
    out.samples.resize(d);
    for (std::size_t i = 0; i < d; ++i) out.samples[(i + k) % d] = x.samples[i];
    return out;
}

Signal mask_patch(const Signal& delta, std::size_t k, std::size_t frame_length) {
    const std::size_t s = delta.size();
    if (s == 0 || s > frame_length)
        throw std::invalid_argument("mask_patch: patch length must be in [1, frame_length]");
    if (k >= frame_length)
        throw std::invalid_argument("mask_patch: offset must be inside the frame");
    Signal out;
    out.sample_rate_hz = delta.sample_rate_hz;
    out.samples.assign(frame_length, 0.0);
    const std::size_t copy = std::min(s, frame_length - k);  // truncate, never wrap
    for (std::size_t i = 0; i < copy; ++i) out.samples[k + i] = delta.samples[i];
    return out;
}

SpectralStats spectral_magnitude_stats(const Signal& x, std::size_t frame_length) {
    if (x.size() > frame_length)
        throw std::invalid_argument("spectral_magnitude_stats: signal longer than frame");
    Signal padded;
    padded.sample_rate_hz = x.sample_rate_hz;
    padded.samples.assign(frame_length, 0.0);
    std::copy(x.samples.begin(), x.samples.end(), padded.samples.begin());
    const Spectrum s = dft(padded);
    SpectralStats stats;
    double sum = 0.0;
    for (const cd& bin : s.bins) {
        const double m = std::abs(bin);
        sum += m;
        stats.max_magnitude = std::max(stats.max_magnitude, m);
    }
    stats.avg_magnitude = sum / static_cast<double>(s.size());
    return stats;
}

}  // namespace arna
