#include "symml/lstm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "symml/errors.hpp"

namespace symml {

namespace {

using RowMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z)
{
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

void check_gate(const LstmGate& g, Eigen::Index hidden, Eigen::Index input)
{
    if (g.U.rows() != hidden || g.U.cols() != input || g.V.rows() != hidden || g.V.cols() != hidden ||
        g.b.size() != hidden)
        throw ShapeMismatch("lstm gate shapes are inconsistent");
    if (!g.U.allFinite() || !g.V.allFinite() || !g.b.allFinite())
        throw InvalidArgument("lstm parameters must be finite");
}

LstmGate zero_gate(int input, int hidden)
{
    return {Eigen::MatrixXd::Zero(hidden, input), Eigen::MatrixXd::Zero(hidden, hidden), Eigen::VectorXd::Zero(hidden)};
}

std::array<LstmGate*, 4> gates(LstmCellParams& c) { return {&c.f, &c.i, &c.o, &c.c}; }
std::array<const LstmGate*, 4> gates(const LstmCellParams& c) { return {&c.f, &c.i, &c.o, &c.c}; }

// Walks the canonical flat layout; `visit(block, rows, cols)` is called for every matrix or vector.
template <class Model, class Visit>
void for_each_block(Model& enc, Visit&& visit)
{
    for (auto* g : gates(enc.cell)) {
        visit(g->U);
        visit(g->V);
        visit(g->b);
    }
    visit(enc.head_w);
    visit(enc.head_b);
}

template <class M>
void read_block(M& m, std::span<const double> flat, std::size_t& pos)
{
    if constexpr (M::ColsAtCompileTime == 1) {
        for (Eigen::Index r = 0; r < m.size(); ++r)
            m[r] = flat[pos++];
    } else {
        m = ConstRowMap(flat.data() + pos, m.rows(), m.cols());
        pos += static_cast<std::size_t>(m.size());
    }
}

template <class M>
void write_block(const M& m, std::vector<double>& flat)
{
    if constexpr (M::ColsAtCompileTime == 1) {
        flat.insert(flat.end(), m.data(), m.data() + m.size());
    } else {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                flat.push_back(m(r, c));
    }
}

struct StepRecord {
    Eigen::VectorXd x, h_prev, c_prev, f, i, o, g, c, tanh_c;
};

Eigen::VectorXd window_input(const Vec2& v)
{
    Eigen::VectorXd x(2);
    x << v.x(), v.y();
    return x;
}

void check_window_len(const EncoderModel& enc, std::size_t n)
{
    if (n != enc.window_len)
        throw WindowLengthMismatch("window has " + std::to_string(n) + " steps, encoder expects " +
                                   std::to_string(enc.window_len));
}

Eigen::VectorXd targets(const EncoderSample& s, int n_params)
{
    if (s.params.size() != n_params)
        throw ShapeMismatch("encoder sample has the wrong number of parameter targets");
    Eigen::VectorXd t(2 + n_params);
    t << s.q_y, s.p_y, s.params;
    return t;
}

} // namespace

std::size_t LstmCellParams::param_count() const
{
    const auto h = static_cast<std::size_t>(hidden_size());
    const auto in = static_cast<std::size_t>(input_size());
    return 4 * (h * in + h * h + h);
}

void LstmCellParams::validate() const
{
    const auto h = f.U.rows();
    const auto in = f.U.cols();
    if (h < 1 || in < 1)
        throw ShapeMismatch("lstm cell needs positive sizes");
    for (const auto* g : gates(*this))
        check_gate(*g, h, in);
}

LstmCellParams LstmCellParams::zeros(int input_size, int hidden_size)
{
    if (input_size < 1 || hidden_size < 1)
        throw ShapeMismatch("lstm cell needs positive sizes");
    return {zero_gate(input_size, hidden_size), zero_gate(input_size, hidden_size), zero_gate(input_size, hidden_size),
            zero_gate(input_size, hidden_size)};
}

LstmState lstm_step(const LstmCellParams& cell, const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                    const Eigen::VectorXd& c)
{
    if (x.size() != cell.input_size() || h.size() != cell.hidden_size() || c.size() != cell.hidden_size())
        throw ShapeMismatch("lstm_step input, hidden or cell vector has the wrong size");
    const Eigen::VectorXd f = sigmoid(cell.f.U * x + cell.f.V * h + cell.f.b);
    const Eigen::VectorXd i = sigmoid(cell.i.U * x + cell.i.V * h + cell.i.b);
    const Eigen::VectorXd o = sigmoid(cell.o.U * x + cell.o.V * h + cell.o.b);
    const Eigen::VectorXd g = (cell.c.U * x + cell.c.V * h + cell.c.b).array().tanh().matrix();
    LstmState next;
    next.c = f.cwiseProduct(c) + i.cwiseProduct(g);
    next.h = o.cwiseProduct(next.c.array().tanh().matrix());
    return next;
}

void EncoderModel::validate() const
{
    cell.validate();
    if (head_w.cols() != cell.hidden_size() || head_w.rows() != head_b.size())
        throw ShapeMismatch("encoder head does not match the hidden size");
    if (n_params() < 1 || n_params() > 2)
        throw ShapeMismatch("encoder head must output (q_y, p_y) plus one or two parameters");
    if (window_len < 1)
        throw InvalidArgument("encoder window length must be >= 1");
}

EncoderModel EncoderModel::zeros(int hidden_size, int n_params, std::size_t window_len)
{
    EncoderModel e;
    e.cell = LstmCellParams::zeros(2, hidden_size);
    e.head_w = Eigen::MatrixXd::Zero(2 + n_params, hidden_size);
    e.head_b = Eigen::VectorXd::Zero(2 + n_params);
    e.window_len = window_len;
    e.validate();
    return e;
}

EncoderModel EncoderModel::create(int hidden_size, int n_params, std::size_t window_len, std::uint64_t seed)
{
    EncoderModel e = zeros(hidden_size, n_params, window_len);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& m) {
        const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = u(rng);
    };
    for (auto* g : gates(e.cell)) {
        fill(g->U);
        fill(g->V);
    }
    fill(e.head_w);
    return e;
}

std::size_t EncoderModel::param_count() const
{
    return cell.param_count() + static_cast<std::size_t>(head_w.size() + head_b.size());
}

std::vector<double> EncoderModel::flat_params() const
{
    std::vector<double> flat;
    flat.reserve(param_count());
    for_each_block(*this, [&](const auto& m) { write_block(m, flat); });
    return flat;
}

void EncoderModel::set_flat_params(std::span<const double> flat)
{
    if (flat.size() != param_count())
        throw ShapeMismatch("flat parameter vector has the wrong size");
    std::size_t pos = 0;
    for_each_block(*this, [&](auto& m) { read_block(m, flat, pos); });
}

EncoderOutput encode_window(const EncoderModel& enc, std::span<const Vec2> window)
{
    check_window_len(enc, window.size());
    const int hidden = enc.cell.hidden_size();
    LstmState s{Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden)};
    for (const auto& v : window)
        s = lstm_step(enc.cell, window_input(v), s.h, s.c);
    const Eigen::VectorXd y = enc.head_w * s.h + enc.head_b;
    return {y[0], y[1], y.tail(y.size() - 2)};
}

double encoder_loss(const EncoderModel& enc, std::span<const EncoderSample> batch)
{
    if (batch.empty())
        throw EmptyBatch("encoder loss needs at least one sample");
    std::vector<double> losses;
    losses.reserve(batch.size());
    for (const auto& s : batch) {
        const EncoderOutput out = encode_window(enc, s.window);
        Eigen::VectorXd y(2 + out.params.size());
        y << out.q_y, out.p_y, out.params;
        losses.push_back((y - targets(s, enc.n_params())).squaredNorm());
    }
    // Summing in sorted order makes the mean independent of batch order.
    std::sort(losses.begin(), losses.end());
    double total = 0.0;
    for (double l : losses)
        total += l;
    return total / static_cast<double>(batch.size());
}

double encoder_sample_loss_grad(const EncoderModel& enc, const EncoderSample& sample, std::span<double> grad)
{
    check_window_len(enc, sample.window.size());
    if (grad.size() != enc.param_count())
        throw ShapeMismatch("gradient buffer has the wrong size");
    const auto& cell = enc.cell;
    const int hidden = cell.hidden_size();

    std::vector<StepRecord> steps;
    steps.reserve(sample.window.size());
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
    for (const auto& v : sample.window) {
        StepRecord r;
        r.x = window_input(v);
        r.h_prev = h;
        r.c_prev = c;
        r.f = sigmoid(cell.f.U * r.x + cell.f.V * h + cell.f.b);
        r.i = sigmoid(cell.i.U * r.x + cell.i.V * h + cell.i.b);
        r.o = sigmoid(cell.o.U * r.x + cell.o.V * h + cell.o.b);
        r.g = (cell.c.U * r.x + cell.c.V * h + cell.c.b).array().tanh().matrix();
        r.c = r.f.cwiseProduct(c) + r.i.cwiseProduct(r.g);
        r.tanh_c = r.c.array().tanh().matrix();
        h = r.o.cwiseProduct(r.tanh_c);
        c = r.c;
        steps.push_back(std::move(r));
    }
    const Eigen::VectorXd y = enc.head_w * h + enc.head_b;
    const Eigen::VectorXd resid = y - targets(sample, enc.n_params());
    const Eigen::VectorXd dy = 2.0 * resid;

    EncoderModel g = EncoderModel::zeros(hidden, enc.n_params(), enc.window_len);
    g.head_w = dy * h.transpose();
    g.head_b = dy;

    Eigen::VectorXd dh = enc.head_w.transpose() * dy;
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(hidden);
    for (std::size_t t = steps.size(); t-- > 0;) {
        const StepRecord& r = steps[t];
        const Eigen::VectorXd d_o = dh.cwiseProduct(r.tanh_c);
        dc += dh.cwiseProduct(r.o).cwiseProduct((1.0 - r.tanh_c.array().square()).matrix());
        const Eigen::VectorXd d_f = dc.cwiseProduct(r.c_prev);
        const Eigen::VectorXd d_i = dc.cwiseProduct(r.g);
        const Eigen::VectorXd d_g = dc.cwiseProduct(r.i);

        const std::array<Eigen::VectorXd, 4> pre{
            d_f.cwiseProduct(r.f.cwiseProduct((1.0 - r.f.array()).matrix())),
            d_i.cwiseProduct(r.i.cwiseProduct((1.0 - r.i.array()).matrix())),
            d_o.cwiseProduct(r.o.cwiseProduct((1.0 - r.o.array()).matrix())),
            d_g.cwiseProduct((1.0 - r.g.array().square()).matrix())};

        const auto params = gates(cell);
        const auto grads = gates(g.cell);
        dh = Eigen::VectorXd::Zero(hidden);
        for (std::size_t k = 0; k < 4; ++k) {
            grads[k]->U += pre[k] * r.x.transpose();
            grads[k]->V += pre[k] * r.h_prev.transpose();
            grads[k]->b += pre[k];
            dh += params[k]->V.transpose() * pre[k];
        }
        dc = dc.cwiseProduct(r.f);
    }

    const std::vector<double> flat = g.flat_params();
    for (std::size_t k = 0; k < flat.size(); ++k)
        grad[k] += flat[k];
    return resid.squaredNorm();
}

std::size_t window_count(std::size_t length, std::size_t window_len, std::size_t stride)
{
    if (stride < 1)
        throw InvalidArgument("window stride must be >= 1");
    if (window_len < 1 || length < window_len)
        return 0;
    return (length - window_len) / stride + 1;
}

ParamEstimate infer_param_ensemble(const WindowEncoder& encoder, std::size_t window_len,
                                   std::span<const Vec2> series, std::size_t stride, int param_index)
{
    const std::size_t n = window_count(series.size(), window_len, stride);
    if (n == 0)
        throw TooShort("series of length " + std::to_string(series.size()) + " holds no window of length " +
                       std::to_string(window_len));
    ParamEstimate est;
    est.samples.resize(n);
    for (std::size_t w = 0; w < n; ++w) {
        const EncoderOutput out = encoder(series.subspan(w * stride, window_len));
        if (param_index < 0 || param_index >= out.params.size())
            throw InvalidArgument("parameter index out of range");
        est.samples[w] = out.params[param_index];
    }
    double sum = 0.0;
    for (double v : est.samples)
        sum += v;
    est.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double v : est.samples)
        sq += (v - est.mean) * (v - est.mean);
    est.stddev = std::sqrt(sq / static_cast<double>(n));
    return est;
}

ParamEstimate infer_param_ensemble(const EncoderModel& enc, std::span<const Vec2> series, std::size_t stride,
                                   int param_index)
{
    return infer_param_ensemble([&enc](std::span<const Vec2> w) { return encode_window(enc, w); }, enc.window_len,
                                series, stride, param_index);
}

Trajectory predict_from_partial(const WindowEncoder& encoder, std::size_t window_len, int n_params,
                                const DerivativeField& field, std::span<const Vec2> observed, std::size_t horizon,
                                double dt, std::size_t stride)
{
    if (observed.size() < window_len)
        throw TooShort("observed series is shorter than one encoder window");
    PotentialParams params = PotentialParams::single(infer_param_ensemble(encoder, window_len, observed, stride, 0).mean);
    if (n_params == 2)
        params.beta = infer_param_ensemble(encoder, window_len, observed, stride, 1).mean;

    const EncoderOutput last = encoder(observed.last(window_len));
    const Vec2& seen = observed.back();
    const PhaseState start{Vec2(seen.x(), last.q_y), Vec2(seen.y(), last.p_y)};
    return integrate(start, dt, horizon, field, params);
}

Trajectory predict_from_partial(const EncoderModel& enc, const SeparableModel& asrnn, std::span<const Vec2> observed,
                                std::size_t horizon, double dt, std::size_t stride)
{
    return predict_from_partial([&enc](std::span<const Vec2> w) { return encode_window(enc, w); }, enc.window_len,
                                enc.n_params(), network_field(asrnn), observed, horizon, dt, stride);
}

} // namespace symml
