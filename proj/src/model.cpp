#include "arna/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "arna/util.hpp"

namespace arna {

namespace {

constexpr char kModelMagic[4] = {'A', 'R', 'M', 'D'};
constexpr std::uint32_t kModelVersion = 1;

struct ParamLayout {
    std::vector<std::size_t> offsets;  // start of each layer's block in values
    std::size_t total = 0;
};

ParamLayout make_layout(const ArchSpec& arch, const std::vector<TensorShape>& trace) {
    ParamLayout lay;
    lay.offsets.assign(arch.layers.size(), 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        lay.offsets[i] = off;
        if (l.kind == LayerKind::conv1d) {
            off += static_cast<std::size_t>(l.out_channels) *
                       static_cast<std::size_t>(trace[i].channels) * static_cast<std::size_t>(l.kernel) +
                   static_cast<std::size_t>(l.out_channels);
        } else if (l.kind == LayerKind::dense) {
            off += static_cast<std::size_t>(l.units) * static_cast<std::size_t>(trace[i].count()) +
                   static_cast<std::size_t>(l.units);
        }
    }
    lay.total = off;
    return lay;
}

// Scratch reused across calls; per-layer activations, pooling argmaxes and
// backward gradients. Thread-local so concurrent evaluation needs no locks.
struct Workspace {
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> grad;
    std::vector<std::vector<int>> argmax;
};

thread_local Workspace tl_ws;

void ensure_workspace(Workspace& ws, const ArchSpec& arch, const std::vector<TensorShape>& trace,
                      bool want_grad) {
    ws.act.resize(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
        ws.act[i].resize(static_cast<std::size_t>(trace[i].count()));
    ws.argmax.resize(arch.layers.size());
    for (std::size_t i = 0; i < arch.layers.size(); ++i)
        if (arch.layers[i].kind == LayerKind::max_pool2)
            ws.argmax[i].resize(static_cast<std::size_t>(trace[i + 1].count()));
    if (want_grad) {
        ws.grad.resize(trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i)
            ws.grad[i].resize(static_cast<std::size_t>(trace[i].count()));
    }
}

inline void hash_step(std::uint64_t* h, std::uint64_t v) {
    if (!h) return;
    *h ^= v + 0x9e3779b97f4a7c15ull;
    *h *= 0x100000001b3ull;
}

void run_forward(const ModelParams& p, const std::vector<TensorShape>& trace,
                 const ParamLayout& lay, Workspace& ws, std::uint64_t* pattern = nullptr) {
    for (std::size_t li = 0; li < p.arch.layers.size(); ++li) {
        const LayerSpec& L = p.arch.layers[li];
        const TensorShape in_s = trace[li];
        const TensorShape out_s = trace[li + 1];
        const double* in = ws.act[li].data();
        double* out = ws.act[li + 1].data();
        switch (L.kind) {
            case LayerKind::conv1d: {
                const int ci = in_s.channels, lin = in_s.length;
                const int co = out_s.channels, lo = out_s.length, K = L.kernel;
                const double* w = p.values.data() + lay.offsets[li];
                const double* b = w + static_cast<std::size_t>(co) * ci * K;
                for (int oc = 0; oc < co; ++oc) {
                    double* o = out + static_cast<std::size_t>(oc) * lo;
                    std::fill(o, o + lo, b[oc]);
                    for (int ic = 0; ic < ci; ++ic) {
                        const double* xin = in + static_cast<std::size_t>(ic) * lin;
                        const double* wk = w + (static_cast<std::size_t>(oc) * ci + ic) * K;
                        for (int k = 0; k < K; ++k) {
                            const double wv = wk[k];
                            const double* xs = xin + k;
                            for (int t = 0; t < lo; ++t) o[t] += wv * xs[t];
                        }
                    }
                }
                break;
            }
            case LayerKind::leaky_relu: {
                const int n = out_s.count();
                for (int i = 0; i < n; ++i) {
                    const bool positive = in[i] > 0.0;
                    out[i] = positive ? in[i] : p.leaky_slope * in[i];
                    hash_step(pattern, positive ? 1 : 0);
                }
                break;
            }
            case LayerKind::max_pool2: {
                int* am = ws.argmax[li].data();
                const int c = in_s.channels, lin = in_s.length, lo = out_s.length;
                for (int ch = 0; ch < c; ++ch) {
                    for (int t = 0; t < lo; ++t) {
                        const int base = ch * lin + 2 * t;
                        const bool second = in[base + 1] > in[base];  // first wins ties
                        out[ch * lo + t] = second ? in[base + 1] : in[base];
                        am[ch * lo + t] = base + (second ? 1 : 0);
                        hash_step(pattern, second ? 1 : 0);
                    }
                }
                break;
            }
            case LayerKind::flatten: {
                std::copy(in, in + out_s.count(), out);
                break;
            }
            case LayerKind::dense: {
                const int n = in_s.count(), u = out_s.count();
                const double* w = p.values.data() + lay.offsets[li];
                const double* b = w + static_cast<std::size_t>(u) * n;
                for (int j = 0; j < u; ++j) {
                    const double* wr = w + static_cast<std::size_t>(j) * n;
                    double acc = b[j];
                    for (int i = 0; i < n; ++i) acc += wr[i] * in[i];
                    out[j] = acc;
                }
                break;
            }
            case LayerKind::log_softmax: {
                const int n = out_s.count();
                double mx = in[0];
                for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
                double se = 0.0;
                for (int i = 0; i < n; ++i) se += std::exp(in[i] - mx);
                const double lse = mx + std::log(se);
                for (int i = 0; i < n; ++i) out[i] = in[i] - lse;
                break;
            }
        }
    }
}

// Backward pass for the negative log-likelihood of `label`. Fills
// ws.grad[0] = dL/d(input); accumulates dL/d(theta) into pg when non-null.
double run_backward(const ModelParams& p, const std::vector<TensorShape>& trace,
                    const ParamLayout& lay, Workspace& ws, int label, std::vector<double>* pg) {
    const std::vector<double>& logp = ws.act.back();
    const double loss = -logp[static_cast<std::size_t>(label)];
    std::vector<double>& top = ws.grad.back();
    std::fill(top.begin(), top.end(), 0.0);
    top[static_cast<std::size_t>(label)] = -1.0;

    for (std::size_t li = p.arch.layers.size(); li-- > 0;) {
        const LayerSpec& L = p.arch.layers[li];
        const TensorShape in_s = trace[li];
        const TensorShape out_s = trace[li + 1];
        const double* in = ws.act[li].data();
        const double* gout = ws.grad[li + 1].data();
        double* gin = ws.grad[li].data();
        switch (L.kind) {
            case LayerKind::conv1d: {
                const int ci = in_s.channels, lin = in_s.length;
                const int co = out_s.channels, lo = out_s.length, K = L.kernel;
                const double* w = p.values.data() + lay.offsets[li];
                double* gw = pg ? pg->data() + lay.offsets[li] : nullptr;
                double* gb = gw ? gw + static_cast<std::size_t>(co) * ci * K : nullptr;
                std::fill(gin, gin + in_s.count(), 0.0);
                for (int oc = 0; oc < co; ++oc) {
                    const double* go = gout + static_cast<std::size_t>(oc) * lo;
                    for (int ic = 0; ic < ci; ++ic) {
                        double* gi = gin + static_cast<std::size_t>(ic) * lin;
                        const double* xin = in + static_cast<std::size_t>(ic) * lin;
                        const double* wk = w + (static_cast<std::size_t>(oc) * ci + ic) * K;
                        double* gwk = gw ? gw + (static_cast<std::size_t>(oc) * ci + ic) * K : nullptr;
                        for (int k = 0; k < K; ++k) {
                            const double wv = wk[k];
                            double* gs = gi + k;
                            for (int t = 0; t < lo; ++t) gs[t] += wv * go[t];
                            if (gwk) {
                                const double* xs = xin + k;
                                double acc = 0.0;
                                for (int t = 0; t < lo; ++t) acc += xs[t] * go[t];
                                gwk[k] += acc;
                            }
                        }
                    }
                    if (gb) {
                        double acc = 0.0;
                        for (int t = 0; t < lo; ++t) acc += go[t];
                        gb[oc] += acc;
                    }
                }
                break;
            }
            case LayerKind::leaky_relu: {
                const int n = in_s.count();
                for (int i = 0; i < n; ++i)
                    gin[i] = in[i] > 0.0 ? gout[i] : p.leaky_slope * gout[i];
                break;
            }
            case LayerKind::max_pool2: {
                const int* am = ws.argmax[li].data();
                std::fill(gin, gin + in_s.count(), 0.0);
                const int n = out_s.count();
                for (int i = 0; i < n; ++i) gin[am[i]] += gout[i];
                break;
            }
            case LayerKind::flatten: {
                std::copy(gout, gout + out_s.count(), gin);
                break;
            }
            case LayerKind::dense: {
                const int n = in_s.count(), u = out_s.count();
                const double* w = p.values.data() + lay.offsets[li];
                double* gw = pg ? pg->data() + lay.offsets[li] : nullptr;
                double* gb = gw ? gw + static_cast<std::size_t>(u) * n : nullptr;
                std::fill(gin, gin + n, 0.0);
                for (int j = 0; j < u; ++j) {
                    const double gj = gout[j];
                    const double* wr = w + static_cast<std::size_t>(j) * n;
                    for (int i = 0; i < n; ++i) gin[i] += wr[i] * gj;
                    if (gw) {
                        double* gwr = gw + static_cast<std::size_t>(j) * n;
                        for (int i = 0; i < n; ++i) gwr[i] += gj * in[i];
                        gb[j] += gj;
                    }
                }
                break;
            }
            case LayerKind::log_softmax: {
                // dL/dz_j = gout_j - softmax_j * sum(gout); act[li+1] holds logp.
                const int n = out_s.count();
                const double* lp = ws.act[li + 1].data();
                double gsum = 0.0;
                for (int i = 0; i < n; ++i) gsum += gout[i];
                for (int i = 0; i < n; ++i) gin[i] = gout[i] - std::exp(lp[i]) * gsum;
                break;
            }
        }
    }
    return loss;
}

void check_input(const ModelParams& p, const Signal& x) {
    if (static_cast<int>(x.size()) != p.arch.input_length)
        throw std::invalid_argument("model: input length " + std::to_string(x.size()) +
                                    " does not match architecture length " +
                                    std::to_string(p.arch.input_length));
}

void check_label(const ModelParams& p, int label) {
    if (label < 0 || label >= p.arch.num_outputs)
        throw std::invalid_argument("model: label " + std::to_string(label) +
                                    " outside [0, " + std::to_string(p.arch.num_outputs) + ")");
}

}  // namespace

ArchSpec ArchSpec::radar_cnn(int input_length, int num_outputs) {
    ArchSpec a;
    a.input_length = input_length;
    a.num_outputs = num_outputs;
    a.layers = {
        {LayerKind::conv1d, 16, 3, 0},
        {LayerKind::leaky_relu, 0, 0, 0},
        {LayerKind::max_pool2, 0, 0, 0},
        {LayerKind::conv1d, 32, 3, 0},
        {LayerKind::leaky_relu, 0, 0, 0},
        {LayerKind::max_pool2, 0, 0, 0},
        {LayerKind::conv1d, 64, 3, 0},
        {LayerKind::leaky_relu, 0, 0, 0},
        {LayerKind::max_pool2, 0, 0, 0},
        {LayerKind::flatten, 0, 0, 0},
        {LayerKind::dense, 0, 0, 16},
        {LayerKind::leaky_relu, 0, 0, 0},
        {LayerKind::dense, 0, 0, num_outputs},
        {LayerKind::log_softmax, 0, 0, 0},
    };
    return a;
}

std::vector<TensorShape> ArchSpec::shape_trace() const {
    if (input_length < 1) throw std::invalid_argument("arch: input length must be >= 1");
    std::vector<TensorShape> trace;
    trace.push_back({1, input_length});
    for (const LayerSpec& l : layers) {
        const TensorShape s = trace.back();
        switch (l.kind) {
            case LayerKind::conv1d:
                if (l.out_channels < 1 || l.kernel < 1)
                    throw std::invalid_argument("arch: conv needs channels and kernel >= 1");
                if (s.length < l.kernel)
                    throw std::invalid_argument("arch: conv kernel longer than its input");
                trace.push_back({l.out_channels, s.length - l.kernel + 1});
                break;
            case LayerKind::leaky_relu:
                trace.push_back(s);
                break;
            case LayerKind::max_pool2:
                if (s.length < 2) throw std::invalid_argument("arch: pool input shorter than 2");
                trace.push_back({s.channels, s.length / 2});
                break;
            case LayerKind::flatten:
                trace.push_back({1, s.count()});
                break;
            case LayerKind::dense:
                if (l.units < 1) throw std::invalid_argument("arch: dense needs units >= 1");
                trace.push_back({1, l.units});
                break;
            case LayerKind::log_softmax:
                if (s.count() < 1) throw std::invalid_argument("arch: softmax over empty vector");
                trace.push_back(s);
                break;
        }
    }
    return trace;
}

std::size_t ArchSpec::parameter_count() const {
    return make_layout(*this, shape_trace()).total;
}

ModelParams init_params(const ArchSpec& arch, std::uint64_t seed) {
    const std::vector<TensorShape> trace = arch.shape_trace();
    const ParamLayout lay = make_layout(arch, trace);
    ModelParams p;
    p.arch = arch;
    p.values.resize(lay.total);
    std::mt19937_64 rng = make_rng(seed, 0);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        std::size_t count = 0;
        int fan_in = 0;
        if (l.kind == LayerKind::conv1d) {
            fan_in = trace[i].channels * l.kernel;
            count = static_cast<std::size_t>(l.out_channels) * trace[i].channels * l.kernel +
                    static_cast<std::size_t>(l.out_channels);
        } else if (l.kind == LayerKind::dense) {
            fan_in = trace[i].count();
            count = static_cast<std::size_t>(l.units) * trace[i].count() +
                    static_cast<std::size_t>(l.units);
        } else {
            continue;
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t j = 0; j < count; ++j) p.values[lay.offsets[i] + j] = dist(rng);
    }
    return p;
}

std::vector<double> forward(const ModelParams& params, const Signal& x) {
    check_input(params, x);
    const std::vector<TensorShape> trace = params.arch.shape_trace();
    const ParamLayout lay = make_layout(params.arch, trace);
    if (params.values.size() != lay.total)
        throw std::invalid_argument("model: parameter vector does not match architecture");
    Workspace& ws = tl_ws;
    ensure_workspace(ws, params.arch, trace, false);
    std::copy(x.samples.begin(), x.samples.end(), ws.act[0].begin());
    run_forward(params, trace, lay, ws);
    return ws.act.back();
}

int predict(const ModelParams& params, const Signal& x) {
    const std::vector<double> logp = forward(params, x);
    return static_cast<int>(std::max_element(logp.begin(), logp.end()) - logp.begin());
}

ProbeResult forward_probe(const ModelParams& params, const Signal& x) {
    check_input(params, x);
    const std::vector<TensorShape> trace = params.arch.shape_trace();
    const ParamLayout lay = make_layout(params.arch, trace);
    if (params.values.size() != lay.total)
        throw std::invalid_argument("model: parameter vector does not match architecture");
    Workspace& ws = tl_ws;
    ensure_workspace(ws, params.arch, trace, false);
    std::copy(x.samples.begin(), x.samples.end(), ws.act[0].begin());
    ProbeResult out;
    out.pattern_hash = 0xcbf29ce484222325ull;
    run_forward(params, trace, lay, ws, &out.pattern_hash);
    out.log_probs = ws.act.back();
    return out;
}

LossGrad loss_and_input_gradient(const ModelParams& params, const Signal& x, int label) {
    check_label(params, label);
    LossGrad out;
    out.input_gradient.resize(x.size());
    out.loss = loss_and_gradients(params, x, label, nullptr, &out.input_gradient);
    return out;
}

double loss_and_gradients(const ModelParams& params, const Signal& x, int label,
                          std::vector<double>* param_grad, std::vector<double>* input_grad) {
    check_input(params, x);
    check_label(params, label);
    const std::vector<TensorShape> trace = params.arch.shape_trace();
    const ParamLayout lay = make_layout(params.arch, trace);
    if (params.values.size() != lay.total)
        throw std::invalid_argument("model: parameter vector does not match architecture");
    if (param_grad && param_grad->size() != lay.total)
        throw std::invalid_argument("model: gradient buffer does not match parameter count");
    Workspace& ws = tl_ws;
    ensure_workspace(ws, params.arch, trace, true);
    std::copy(x.samples.begin(), x.samples.end(), ws.act[0].begin());
    run_forward(params, trace, lay, ws);
    const double loss = run_backward(params, trace, lay, ws, label, param_grad);
    if (input_grad) *input_grad = ws.grad[0];
    return loss;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate},
                       {"batch_size", c.batch_size},
                       {"epochs", c.epochs},
                       {"adam_beta1", c.adam_beta1},
                       {"adam_beta2", c.adam_beta2},
                       {"adam_eps", c.adam_eps},
                       {"eval_every", c.eval_every},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    const TrainConfig base;
    c.learning_rate = j.value("learning_rate", base.learning_rate);
    c.batch_size = j.value("batch_size", base.batch_size);
    c.epochs = j.value("epochs", base.epochs);
    c.adam_beta1 = j.value("adam_beta1", base.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", base.adam_beta2);
    c.adam_eps = j.value("adam_eps", base.adam_eps);
    c.eval_every = j.value("eval_every", base.eval_every);
    c.seed = j.value("seed", base.seed);
}

TrainResult train(const Dataset& train_set, const Dataset* eval_set, const TrainConfig& cfg,
                  const ArchSpec& arch, const SampleExpand& expand) {
    if (train_set.empty()) throw config_error("train: empty training set");
    if (cfg.batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (cfg.epochs < 0) throw config_error("train: epochs must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw config_error("train: learning rate must be positive");
    if (arch.layers.empty() || arch.layers.back().kind != LayerKind::log_softmax)
        throw config_error("train: architecture must end in log-probabilities");
    for (const LabeledSignal& s : train_set)
        if (s.label < 0 || s.label >= arch.num_outputs)
            throw config_error("train: label " + std::to_string(s.label) +
                               " outside the architecture's output range");

    TrainResult result;
    result.params = init_params(arch, cfg.seed);
    std::vector<double>& theta = result.params.values;

    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> visit_grad(theta.size(), 0.0);
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
    std::uint64_t step = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 shuffle_rng = make_rng(cfg.seed, 1);

    std::size_t epoch_contrib = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        epoch_contrib = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            std::size_t batch_contrib = 0;
            for (std::size_t i = start; i < end; ++i) {
                const LabeledSignal& s = train_set[order[i]];
                // Each sample's gradient lands in its own buffer before joining
                // the batch sum; the batch is then a plain chain of rounded
                // per-sample contributions regardless of how the compiler fuses
                // the in-place accumulation inside the backward pass. That
                // keeps a sample expanded to n identical copies exactly
                // equivalent to scaling its contribution by n, bit for bit.
                std::fill(visit_grad.begin(), visit_grad.end(), 0.0);
                double visit_loss = 0.0;
                if (expand) {
                    const std::vector<Signal> inputs = expand(result.params, s.signal, s.label);
                    if (inputs.empty())
                        throw std::invalid_argument("train: sample expansion returned no inputs");
                    for (const Signal& input : inputs)
                        visit_loss += loss_and_gradients(result.params, input, s.label,
                                                         &visit_grad, nullptr);
                    batch_contrib += inputs.size();
                } else {
                    visit_loss =
                        loss_and_gradients(result.params, s.signal, s.label, &visit_grad, nullptr);
                    ++batch_contrib;
                }
                for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += visit_grad[j];
                epoch_loss += visit_loss;
            }
            const double inv = 1.0 / static_cast<double>(batch_contrib);
            epoch_contrib += batch_contrib;
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double g = grad[i] * inv;
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
                theta[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
            }
        }
        epoch_loss /= static_cast<double>(epoch_contrib);
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch));
        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = epoch_loss;
        if (eval_set && cfg.eval_every > 0 &&
            (epoch % cfg.eval_every == 0 || epoch == cfg.epochs))
            stats.eval_accuracy = accuracy(result.params, *eval_set);
        result.history.push_back(stats);
    }
    return result;
}

double accuracy(const ModelParams& params, const Dataset& ds) {
    if (ds.empty()) throw std::invalid_argument("accuracy: empty dataset");
    std::size_t hits = 0;
    for (const LabeledSignal& s : ds)
        if (predict(params, s.signal) == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

double success_rate(const ModelParams& params, const Dataset& perturbed) {
    return 1.0 - accuracy(params, perturbed);
}

void save_model(const ModelParams& params, const std::filesystem::path& path,
                const TrainConfig* config) {
    BinaryWriter w(path);
    w.bytes(kModelMagic, 4);
    w.u32(kModelVersion);
    w.u32(static_cast<std::uint32_t>(params.arch.input_length));
    w.u32(static_cast<std::uint32_t>(params.arch.num_outputs));
    w.f64(params.leaky_slope);
    w.u32(static_cast<std::uint32_t>(params.arch.layers.size()));
    for (const LayerSpec& l : params.arch.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.i32(l.out_channels);
        w.i32(l.kernel);
        w.i32(l.units);
    }
    w.u64(params.values.size());
    w.f64_array(params.values);

    if (config) {
        nlohmann::json j = *config;
        std::ofstream side(path.string() + ".json");
        if (!side) throw io_error("cannot write sidecar for " + path.string(), 0);
        side << j.dump(2) << "\n";
    }
}

ModelParams load_model(const std::filesystem::path& path) {
    BinaryReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kModelMagic)) r.fail("not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kModelVersion) r.fail("unsupported model version " + std::to_string(version));

    ModelParams p;
    p.arch.input_length = static_cast<int>(r.u32());
    p.arch.num_outputs = static_cast<int>(r.u32());
    p.leaky_slope = r.f64();
    const std::uint32_t n_layers = r.u32();
    if (n_layers > 1024) r.fail("implausible layer count " + std::to_string(n_layers));
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        const std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::log_softmax))
            r.fail("unknown layer kind " + std::to_string(kind));
        l.kind = static_cast<LayerKind>(kind);
        l.out_channels = r.i32();
        l.kernel = r.i32();
        l.units = r.i32();
        p.arch.layers.push_back(l);
    }
    std::size_t expected = 0;
    try {
        expected = p.arch.parameter_count();
    } catch (const std::invalid_argument& e) {
        r.fail(std::string("inconsistent architecture: ") + e.what());
    }
    const std::uint64_t count = r.u64();
    if (count != expected)
        r.fail("parameter count " + std::to_string(count) + " does not match architecture (" +
               std::to_string(expected) + ")");
    p.values = r.f64_array(count);
    return p;
}

}  // namespace arna
