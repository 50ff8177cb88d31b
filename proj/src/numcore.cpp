#include "apprank/numcore.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace apprank::num {

namespace {

void check_vec(const Vec& x, std::size_t n, const char* what) {
    if (x.size() != n) {
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(n) + ", got " + std::to_string(x.size()));
    }
}

std::atomic<std::uint64_t> g_ce_clamp_count{0};

}  // namespace

Matrix& ParameterStore::create(const std::string& name, int rows, int cols) {
    if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
    Param& p = params_[name];
    p.value = Matrix(rows, cols);
    p.grad = Matrix(rows, cols);
    return p.value;
}

Param& ParameterStore::param(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such parameter: " + name);
    return it->second;
}

const Param& ParameterStore::param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such parameter: " + name);
    return it->second;
}

void ParameterStore::zero_grads() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
}

void init_uniform(Matrix& m, RngStream& rng, double lo, double hi) {
    for (double& x : m.v) x = rng.uniform(lo, hi);
}

void init_glorot(Matrix& m, RngStream& rng) {
    const double limit = std::sqrt(6.0 / (m.rows + m.cols));
    init_uniform(m, rng, -limit, limit);
}

Vec dense_forward(const Matrix& W, const Vec& b, const Vec& x) {
    check_vec(x, static_cast<std::size_t>(W.cols), "dense_forward x");
    check_vec(b, static_cast<std::size_t>(W.rows), "dense_forward b");
    Vec y(W.rows);
    for (int r = 0; r < W.rows; ++r) {
        const double* w = W.row(r);
        double acc = b[r];
        for (int c = 0; c < W.cols; ++c) acc += w[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Vec dense_backward(const Matrix& W, const Vec& x, const Vec& dy, Matrix& dW, Matrix& db) {
    check_vec(dy, static_cast<std::size_t>(W.rows), "dense_backward dy");
    check_vec(x, static_cast<std::size_t>(W.cols), "dense_backward x");
    Vec dx(W.cols, 0.0);
    for (int r = 0; r < W.rows; ++r) {
        const double g = dy[r];
        db.v[r] += g;
        double* dw = dW.row(r);
        const double* w = W.row(r);
        for (int c = 0; c < W.cols; ++c) {
            dw[c] += g * x[c];
            dx[c] += g * w[c];
        }
    }
    return dx;
}

double sigmoid(double x) {
    // split on sign so exp never overflows
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vec relu(const Vec& x) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Vec relu_backward(const Vec& pre, const Vec& dy) {
    check_vec(dy, pre.size(), "relu_backward dy");
    Vec dx(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) dx[i] = pre[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

Vec sigmoid(const Vec& x) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    return y;
}

Vec softmax(const Vec& x) {
    if (x.empty()) throw std::invalid_argument("softmax: empty input");
    const double m = *std::max_element(x.begin(), x.end());
    Vec y(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - m);
        sum += y[i];
    }
    for (double& v : y) v /= sum;
    return y;
}

Vec log_softmax(const Vec& x) {
    if (x.empty()) throw std::invalid_argument("log_softmax: empty input");
    const double m = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - lse;
    return y;
}

double mse(double y, double yhat) {
    const double d = y - yhat;
    return d * d;
}

double mse(const Vec& y, const Vec& yhat) {
    check_vec(yhat, y.size(), "mse yhat");
    if (y.empty()) throw std::invalid_argument("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

double hinge_pair(double y1, double y2, double yhat1, double yhat2) {
    const double s = y1 > y2 ? 1.0 : (y1 < y2 ? -1.0 : 0.0);
    return std::max(0.0, 1.0 - s * (yhat1 - yhat2));
}

double cross_entropy(const Vec& p, std::size_t target) {
    if (target >= p.size()) throw std::out_of_range("cross_entropy: target out of range");
    double q = p[target];
    if (q < 1e-12) {
        q = 1e-12;
        ++g_ce_clamp_count;
    }
    return -std::log(q);
}

std::uint64_t cross_entropy_clamp_count() { return g_ce_clamp_count.load(); }
void reset_cross_entropy_clamp_count() { g_ce_clamp_count.store(0); }

Vec dropout(const Vec& x, double rate, bool training, RngStream& rng, Vec* mask) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) {
        if (mask) mask->assign(x.size(), 1.0);
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    Vec y(x.size());
    if (mask) mask->assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = rng.uniform() < rate ? 0.0 : keep_scale;
        y[i] = x[i] * s;
        if (mask) (*mask)[i] = s;
    }
    return y;
}

Vec dropout_backward(const Vec& dy, const Vec& mask) {
    check_vec(mask, dy.size(), "dropout_backward mask");
    Vec dx(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
    return dx;
}

void create_lstm_params(ParameterStore& store, const std::string& prefix,
                        int input, int hidden, RngStream& rng) {
    for (const char* g : {"i", "f", "o", "g"}) {
        init_glorot(store.create(prefix + ".W" + g, hidden, input), rng);
        init_glorot(store.create(prefix + ".U" + g, hidden, hidden), rng);
        store.create(prefix + ".b" + g, hidden, 1);
    }
}

LstmRef lstm_ref(ParameterStore& store, const std::string& prefix) {
    LstmRef r;
    r.Wi = &store.param(prefix + ".Wi");
    r.Wf = &store.param(prefix + ".Wf");
    r.Wo = &store.param(prefix + ".Wo");
    r.Wg = &store.param(prefix + ".Wg");
    r.Ui = &store.param(prefix + ".Ui");
    r.Uf = &store.param(prefix + ".Uf");
    r.Uo = &store.param(prefix + ".Uo");
    r.Ug = &store.param(prefix + ".Ug");
    r.bi = &store.param(prefix + ".bi");
    r.bf = &store.param(prefix + ".bf");
    r.bo = &store.param(prefix + ".bo");
    r.bg = &store.param(prefix + ".bg");
    r.input = r.Wi->value.cols;
    r.hidden = r.Wi->value.rows;
    return r;
}

namespace {

// z = W x + U h + b
Vec gate_pre(const Param& W, const Param& U, const Param& b, const Vec& x, const Vec& h) {
    Vec z = dense_forward(W.value, b.value.v, x);
    for (int r = 0; r < U.value.rows; ++r) {
        const double* u = U.value.row(r);
        double acc = 0.0;
        for (int c = 0; c < U.value.cols; ++c) acc += u[c] * h[c];
        z[r] += acc;
    }
    return z;
}

// accumulate gradients for one gate given dz; adds to dx and dh_prev
void gate_backward(Param& W, Param& U, Param& b, const Vec& x, const Vec& h_prev,
                   const Vec& dz, Vec& dx, Vec& dh_prev) {
    Vec dxx = dense_backward(W.value, x, dz, W.grad, b.grad);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxx[i];
    for (int r = 0; r < U.value.rows; ++r) {
        const double g = dz[r];
        double* du = U.grad.row(r);
        const double* u = U.value.row(r);
        for (int c = 0; c < U.value.cols; ++c) {
            du[c] += g * h_prev[c];
            dh_prev[c] += g * u[c];
        }
    }
}

}  // namespace

void lstm_forward(const LstmRef& p, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                  LstmCache& cache) {
    check_vec(x, static_cast<std::size_t>(p.input), "lstm_forward x");
    check_vec(h_prev, static_cast<std::size_t>(p.hidden), "lstm_forward h_prev");
    check_vec(c_prev, static_cast<std::size_t>(p.hidden), "lstm_forward c_prev");

    cache.x = x;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.i = sigmoid(gate_pre(*p.Wi, *p.Ui, *p.bi, x, h_prev));
    cache.f = sigmoid(gate_pre(*p.Wf, *p.Uf, *p.bf, x, h_prev));
    cache.o = sigmoid(gate_pre(*p.Wo, *p.Uo, *p.bo, x, h_prev));
    Vec g = gate_pre(*p.Wg, *p.Ug, *p.bg, x, h_prev);
    for (double& v : g) v = std::tanh(v);
    cache.g = std::move(g);

    const int h = p.hidden;
    cache.c.assign(h, 0.0);
    cache.tanh_c.assign(h, 0.0);
    cache.h.assign(h, 0.0);
    for (int k = 0; k < h; ++k) {
        cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
        cache.tanh_c[k] = std::tanh(cache.c[k]);
        cache.h[k] = cache.o[k] * cache.tanh_c[k];
    }
}

void lstm_backward(const LstmRef& p, const LstmCache& cache, const Vec& dh, const Vec& dc,
                   Vec& dx, Vec& dh_prev, Vec& dc_prev) {
    const int h = p.hidden;
    check_vec(dh, static_cast<std::size_t>(h), "lstm_backward dh");
    check_vec(dc, static_cast<std::size_t>(h), "lstm_backward dc");

    Vec dzi(h), dzf(h), dzo(h), dzg(h);
    dx.assign(p.input, 0.0);
    dh_prev.assign(h, 0.0);
    dc_prev.assign(h, 0.0);

    for (int k = 0; k < h; ++k) {
        const double do_ = dh[k] * cache.tanh_c[k];
        const double dct = dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]) + dc[k];
        const double di = dct * cache.g[k];
        const double df = dct * cache.c_prev[k];
        const double dg = dct * cache.i[k];
        dc_prev[k] = dct * cache.f[k];
        dzi[k] = di * cache.i[k] * (1.0 - cache.i[k]);
        dzf[k] = df * cache.f[k] * (1.0 - cache.f[k]);
        dzo[k] = do_ * cache.o[k] * (1.0 - cache.o[k]);
        dzg[k] = dg * (1.0 - cache.g[k] * cache.g[k]);
    }

    gate_backward(*p.Wi, *p.Ui, *p.bi, cache.x, cache.h_prev, dzi, dx, dh_prev);
    gate_backward(*p.Wf, *p.Uf, *p.bf, cache.x, cache.h_prev, dzf, dx, dh_prev);
    gate_backward(*p.Wo, *p.Uo, *p.bo, cache.x, cache.h_prev, dzo, dx, dh_prev);
    gate_backward(*p.Wg, *p.Ug, *p.bg, cache.x, cache.h_prev, dzg, dx, dh_prev);
}

void create_mlp_params(ParameterStore& store, const std::string& prefix,
                       int in, int h1, int h2, int out, RngStream& rng) {
    init_glorot(store.create(prefix + ".W1", h1, in), rng);
    store.create(prefix + ".b1", h1, 1);
    init_glorot(store.create(prefix + ".W2", h2, h1), rng);
    store.create(prefix + ".b2", h2, 1);
    init_glorot(store.create(prefix + ".W3", out, h2), rng);
    store.create(prefix + ".b3", out, 1);
}

MlpRef mlp_ref(ParameterStore& store, const std::string& prefix) {
    MlpRef r;
    r.W1 = &store.param(prefix + ".W1");
    r.b1 = &store.param(prefix + ".b1");
    r.W2 = &store.param(prefix + ".W2");
    r.b2 = &store.param(prefix + ".b2");
    r.W3 = &store.param(prefix + ".W3");
    r.b3 = &store.param(prefix + ".b3");
    return r;
}

Vec mlp_forward(const MlpRef& p, const Vec& x, double dropout_rate, bool training,
                RngStream& rng, MlpCache& cache) {
    cache.x = x;
    cache.z1 = dense_forward(p.W1->value, p.b1->value.v, x);
    cache.a1 = relu(cache.z1);
    cache.d1 = dropout(cache.a1, dropout_rate, training, rng, &cache.m1);
    cache.z2 = dense_forward(p.W2->value, p.b2->value.v, cache.d1);
    cache.a2 = relu(cache.z2);
    cache.d2 = dropout(cache.a2, dropout_rate, training, rng, &cache.m2);
    cache.out = dense_forward(p.W3->value, p.b3->value.v, cache.d2);
    return cache.out;
}

Vec mlp_backward(const MlpRef& p, const MlpCache& cache, const Vec& dout) {
    Vec dd2 = dense_backward(p.W3->value, cache.d2, dout, p.W3->grad, p.b3->grad);
    Vec da2 = dropout_backward(dd2, cache.m2);
    Vec dz2 = relu_backward(cache.z2, da2);
    Vec dd1 = dense_backward(p.W2->value, cache.d1, dz2, p.W2->grad, p.b2->grad);
    Vec da1 = dropout_backward(dd1, cache.m1);
    Vec dz1 = relu_backward(cache.z1, da1);
    return dense_backward(p.W1->value, cache.x, dz1, p.W1->grad, p.b1->grad);
}

void Optimizer::step(ParameterStore& store) {
    // validate first so a bad gradient never half-applies a step
    for (const auto& [name, p] : store.items()) {
        for (double g : p.grad.v) {
            if (!std::isfinite(g)) {
                throw std::runtime_error("non-finite gradient in parameter: " + name);
            }
        }
    }
    ++t_;
    for (auto& [name, p] : store.items()) {
        if (cfg_.algo == OptAlgo::sgd) {
            for (std::size_t k = 0; k < p.value.v.size(); ++k) {
                p.value.v[k] -= cfg_.lr * p.grad.v[k];
            }
        } else {
            auto it = moments_.find(name);
            if (it == moments_.end()) {
                it = moments_.emplace(name,
                                      std::make_pair(Matrix(p.value.rows, p.value.cols),
                                                     Matrix(p.value.rows, p.value.cols)))
                         .first;
            }
            Matrix& m = it->second.first;
            Matrix& v = it->second.second;
            const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
            const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            for (std::size_t k = 0; k < p.value.v.size(); ++k) {
                const double g = p.grad.v[k];
                m.v[k] = cfg_.beta1 * m.v[k] + (1.0 - cfg_.beta1) * g;
                v.v[k] = cfg_.beta2 * v.v[k] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m.v[k] / b1t;
                const double vhat = v.v[k] / b2t;
                p.value.v[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }
    store.zero_grads();
}

GradCheckReport gradient_check(ParameterStore& store,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn,
                               double tolerance, double h) {
    store.zero_grads();
    grad_fn();

    // snapshot analytic gradients before perturbing anything
    std::map<std::string, Matrix> analytic;
    for (const auto& [name, p] : store.items()) analytic[name] = p.grad;

    GradCheckReport report;
    for (auto& [name, p] : store.items()) {
        double worst = 0.0;
        for (std::size_t k = 0; k < p.value.v.size(); ++k) {
            const double saved = p.value.v[k];
            p.value.v[k] = saved + h;
            const double lp = loss_fn();
            p.value.v[k] = saved - h;
            const double lm = loss_fn();
            p.value.v[k] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[name].v[k];
            const double rel = std::fabs(a - numeric) /
                               std::max(std::fabs(a) + std::fabs(numeric), 1e-8);
            worst = std::max(worst, rel);
        }
        report.per_param.push_back({name, worst});
        if (worst > report.max_rel_err) {
            report.max_rel_err = worst;
            report.worst_param = name;
        }
    }
    report.pass = report.max_rel_err <= tolerance;
    store.zero_grads();
    return report;
}

namespace {

void write_f64_le(std::ofstream& os, double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64_le(std::ifstream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::string& meta_json,
                     const std::string& manifest_path, const std::string& blob_path) {
    nlohmann::json manifest;
    manifest["format"] = "apprank-checkpoint-v1";
    manifest["meta"] = nlohmann::json::parse(meta_json.empty() ? "{}" : meta_json);
    auto& params = manifest["parameters"] = nlohmann::json::array();
    for (const auto& [name, p] : store.items()) {
        params.push_back({{"name", name}, {"rows", p.value.rows}, {"cols", p.value.cols}});
    }
    std::ofstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot write manifest: " + manifest_path);
    mf << manifest.dump(2) << "\n";

    std::ofstream bf(blob_path, std::ios::binary);
    if (!bf) throw std::runtime_error("cannot write blob: " + blob_path);
    for (const auto& [name, p] : store.items()) {
        for (double x : p.value.v) write_f64_le(bf, x);
    }
}

std::string load_checkpoint(ParameterStore& store, const std::string& manifest_path,
                            const std::string& blob_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot read manifest: " + manifest_path);
    nlohmann::json manifest;
    mf >> manifest;
    if (manifest.value("format", "") != "apprank-checkpoint-v1") {
        throw std::runtime_error("unrecognized checkpoint format in " + manifest_path);
    }

    std::ifstream bf(blob_path, std::ios::binary);
    if (!bf) throw std::runtime_error("cannot read blob: " + blob_path);
    for (const auto& entry : manifest["parameters"]) {
        const std::string name = entry["name"];
        const int rows = entry["rows"];
        const int cols = entry["cols"];
        Matrix& m = store.has(name) ? store.value(name) : store.create(name, rows, cols);
        if (m.rows != rows || m.cols != cols) {
            throw std::runtime_error("shape mismatch for parameter " + name);
        }
        for (double& x : m.v) x = read_f64_le(bf);
        if (!bf) throw std::runtime_error("checkpoint blob truncated at parameter " + name);
    }
    return manifest["meta"].dump();
}

}  // namespace apprank::num
