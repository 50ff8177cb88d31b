#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "apprank/rng.hpp"

// Minimal dense numeric core: just the layers the two models need, with
// explicit forward/backward functions, double precision throughout and
// deterministic iteration everywhere.
namespace apprank::num {

using Vec = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;  // row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

struct Param {
    Matrix value;
    Matrix grad;
};

// Named parameters with gradient slots. std::map keeps iteration order
// stable across runs, which the optimizer and checkpoint format rely on.
class ParameterStore {
public:
    Matrix& create(const std::string& name, int rows, int cols);
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    Param& param(const std::string& name);
    const Param& param(const std::string& name) const;
    Matrix& value(const std::string& name) { return param(name).value; }
    const Matrix& value(const std::string& name) const { return param(name).value; }
    Matrix& grad(const std::string& name) { return param(name).grad; }
    void zero_grads();

    std::map<std::string, Param>& items() { return params_; }
    const std::map<std::string, Param>& items() const { return params_; }

private:
    std::map<std::string, Param> params_;
};

// ---- initialization --------------------------------------------------

void init_uniform(Matrix& m, RngStream& rng, double lo, double hi);
// Glorot-style scaled uniform: +-sqrt(6 / (rows + cols))
void init_glorot(Matrix& m, RngStream& rng);

// ---- dense layer -----------------------------------------------------

// y = W x + b
Vec dense_forward(const Matrix& W, const Vec& b, const Vec& x);
// Accumulates dW, db; returns dx = W^T dy.
Vec dense_backward(const Matrix& W, const Vec& x, const Vec& dy, Matrix& dW, Matrix& db);

// ---- activations -----------------------------------------------------

double sigmoid(double x);
Vec relu(const Vec& x);
// dx = dy where pre > 0 else 0
Vec relu_backward(const Vec& pre, const Vec& dy);
Vec sigmoid(const Vec& x);
// Max-subtracted for stability; input must be non-empty.
Vec softmax(const Vec& x);
// Log-softmax, same stabilization.
Vec log_softmax(const Vec& x);

// ---- losses ----------------------------------------------------------

double mse(double y, double yhat);
double mse(const Vec& y, const Vec& yhat);
// max{0, 1 - sign(y1 - y2) * (yhat1 - yhat2)}
double hinge_pair(double y1, double y2, double yhat1, double yhat2);
// -ln p[target]; p[target] below 1e-12 is clamped and counted.
double cross_entropy(const Vec& p, std::size_t target);
std::uint64_t cross_entropy_clamp_count();
void reset_cross_entropy_clamp_count();

// ---- dropout ---------------------------------------------------------

// Inverted dropout: training keeps each entry with probability 1-rate and
// scales survivors by 1/(1-rate); inference is the identity. When mask is
// non-null it receives the per-entry scale factors for the backward pass.
Vec dropout(const Vec& x, double rate, bool training, RngStream& rng, Vec* mask = nullptr);
Vec dropout_backward(const Vec& dy, const Vec& mask);

// ---- LSTM cell -------------------------------------------------------

// Parameters live in a ParameterStore under <prefix>.{Wi,Wf,Wo,Wg} (h x d),
// <prefix>.{Ui,Uf,Uo,Ug} (h x h), <prefix>.{bi,bf,bo,bg} (h x 1).
void create_lstm_params(ParameterStore& store, const std::string& prefix,
                        int input, int hidden, RngStream& rng);

struct LstmRef {
    Param *Wi, *Wf, *Wo, *Wg;
    Param *Ui, *Uf, *Uo, *Ug;
    Param *bi, *bf, *bo, *bg;
    int input = 0;
    int hidden = 0;
};
LstmRef lstm_ref(ParameterStore& store, const std::string& prefix);

struct LstmCache {
    Vec x, h_prev, c_prev;
    Vec i, f, o, g;  // post-activation gates
    Vec c, h, tanh_c;
};

// Standard cell: c = f .* c_prev + i .* g, h = o .* tanh(c).
void lstm_forward(const LstmRef& p, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                  LstmCache& cache);
// dh/dc are the gradients flowing into h_t and c_t. Accumulates parameter
// gradients, writes input-side gradients.
void lstm_backward(const LstmRef& p, const LstmCache& cache, const Vec& dh, const Vec& dc,
                   Vec& dx, Vec& dh_prev, Vec& dc_prev);

// ---- two-hidden-layer MLP --------------------------------------------

// <prefix>.{W1,b1,W2,b2,W3,b3}; ReLU hidden layers, linear output,
// inverted dropout after each hidden activation.
void create_mlp_params(ParameterStore& store, const std::string& prefix,
                       int in, int h1, int h2, int out, RngStream& rng);

struct MlpRef {
    Param *W1, *b1, *W2, *b2, *W3, *b3;
};
MlpRef mlp_ref(ParameterStore& store, const std::string& prefix);

struct MlpCache {
    Vec x;
    Vec z1, a1, m1, d1;  // pre-act, post-relu, dropout mask, post-dropout
    Vec z2, a2, m2, d2;
    Vec out;
};

Vec mlp_forward(const MlpRef& p, const Vec& x, double dropout_rate, bool training,
                RngStream& rng, MlpCache& cache);
// Returns dx.
Vec mlp_backward(const MlpRef& p, const MlpCache& cache, const Vec& dout);

// ---- optimizer -------------------------------------------------------

enum class OptAlgo { sgd, adam };

struct OptimizerConfig {
    OptAlgo algo = OptAlgo::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    // Applies one update from the accumulated gradients, then zeroes them.
    // A non-finite gradient aborts before touching any parameter and throws
    // with the offending parameter's name.
    void step(ParameterStore& store);

    std::int64_t steps() const { return t_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::int64_t t_ = 0;
    std::map<std::string, std::pair<Matrix, Matrix>> moments_;  // m, v per parameter
};

// ---- gradient checking -----------------------------------------------

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel_err = 0.0;
    std::string worst_param;
    bool pass = false;
};

// Central finite differences against analytic gradients. loss_fn must be a
// deterministic pure forward pass; grad_fn must populate store gradients
// for the same loss. Relative error is |a-n| / max(|a|+|n|, 1e-8).
GradCheckReport gradient_check(ParameterStore& store,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn,
                               double tolerance, double h = 1e-5);

// ---- checkpoints -----------------------------------------------------

// JSON manifest (parameter names, shapes, caller metadata) plus one binary
// blob of little-endian 64-bit floats per parameter, concatenated in
// manifest order in a separate file.
void save_checkpoint(const ParameterStore& store, const std::string& meta_json,
                     const std::string& manifest_path, const std::string& blob_path);
// Recreates parameters from the manifest; returns the caller metadata JSON.
std::string load_checkpoint(ParameterStore& store, const std::string& manifest_path,
                            const std::string& blob_path);

}  // namespace apprank::num
