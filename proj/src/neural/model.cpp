#include "climatune/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "climatune/error.hpp"

namespace climatune {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void expect_size(std::string_view what, std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    throw ModelError(std::string(what) + ": expected " + std::to_string(expected) + " entries, got " +
                     std::to_string(actual));
  }
}

// out = W v + b
void affine(const Matrix& w, std::span<const double> v, const Matrix& b, std::span<double> out) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double acc = b(r, 0);
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> q(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (q[i] = std::exp(z[i] - m));
  for (double& v : q) v /= sum;
  return q;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum);
}

// gates for one step, all post-activation
struct StepOutput {
  std::vector<double> i, f, g, o, cell, cell_tanh, hidden;
};

StepOutput lstm_step(std::span<const double> concat, std::span<const double> prev_cell, const ModelParams& p) {
  const std::size_t h = p.config.hidden;
  StepOutput s{std::vector<double>(h), std::vector<double>(h), std::vector<double>(h), std::vector<double>(h),
               std::vector<double>(h), std::vector<double>(h), std::vector<double>(h)};
  affine(p.input_gate_w, concat, p.input_gate_b, s.i);
  affine(p.forget_gate_w, concat, p.forget_gate_b, s.f);
  affine(p.candidate_w, concat, p.candidate_b, s.g);
  affine(p.output_gate_w, concat, p.output_gate_b, s.o);
  for (std::size_t k = 0; k < h; ++k) {
    s.i[k] = sigmoid(s.i[k]);
    s.f[k] = sigmoid(s.f[k]);
    s.g[k] = std::tanh(s.g[k]);
    s.o[k] = sigmoid(s.o[k]);
    s.cell[k] = s.f[k] * prev_cell[k] + s.i[k] * s.g[k];
    s.cell_tanh[k] = std::tanh(s.cell[k]);
    s.hidden[k] = s.o[k] * s.cell_tanh[k];
  }
  return s;
}

void check_params(const ModelParams& p) {
  const ModelConfig& c = p.config;
  const auto shape = [](std::string_view name, const Matrix& m, std::size_t r, std::size_t k) {
    if (m.rows() != r || m.cols() != k) {
      throw ModelError(std::string(name) + ": expected shape " + std::to_string(r) + "x" + std::to_string(k) +
                       ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
  };
  shape("embedding.pitch", p.pitch_embedding, c.pitch_vocab, c.pitch_embed);
  shape("embedding.duration", p.duration_embedding, c.duration_vocab, c.duration_embed);
  for (const Matrix* w : {&p.input_gate_w, &p.forget_gate_w, &p.candidate_w, &p.output_gate_w}) {
    shape("lstm weight", *w, c.hidden, c.concat_size());
  }
  for (const Matrix* b : {&p.input_gate_b, &p.forget_gate_b, &p.candidate_b, &p.output_gate_b}) {
    shape("lstm bias", *b, c.hidden, 1);
  }
  shape("attention.weight", p.attention_w, c.hidden, c.hidden);
  shape("head.pitch.weight", p.pitch_head_w, c.pitch_vocab, c.hidden);
  shape("head.pitch.bias", p.pitch_head_b, c.pitch_vocab, 1);
  shape("head.duration.weight", p.duration_head_w, c.duration_vocab, c.hidden);
  shape("head.duration.bias", p.duration_head_b, c.duration_vocab, 1);
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& c) {
  if (c.pitch_vocab < 2 || c.duration_vocab < 2) {
    throw ModelError("vocabularies need PAD plus at least one token");
  }
  if (c.hidden == 0 || c.pitch_embed == 0 || c.duration_embed == 0 || c.sql == 0) {
    throw ModelError("model sizes must be positive");
  }
  ModelParams p;
  p.config = c;
  p.pitch_embedding = Matrix(c.pitch_vocab, c.pitch_embed);
  p.duration_embedding = Matrix(c.duration_vocab, c.duration_embed);
  for (Matrix* w : {&p.input_gate_w, &p.forget_gate_w, &p.candidate_w, &p.output_gate_w}) {
    *w = Matrix(c.hidden, c.concat_size());
  }
  for (Matrix* b : {&p.input_gate_b, &p.forget_gate_b, &p.candidate_b, &p.output_gate_b}) *b = Matrix(c.hidden, 1);
  p.attention_w = Matrix(c.hidden, c.hidden);
  p.pitch_head_w = Matrix(c.pitch_vocab, c.hidden);
  p.pitch_head_b = Matrix(c.pitch_vocab, 1);
  p.duration_head_w = Matrix(c.duration_vocab, c.hidden);
  p.duration_head_b = Matrix(c.duration_vocab, 1);
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& c, Rng& rng) {
  ModelParams p = zeros(c);
  const double k_lstm = 1.0 / std::sqrt(static_cast<double>(c.concat_size()));
  const double k_hidden = 1.0 / std::sqrt(static_cast<double>(c.hidden));
  const auto fill = [&](Matrix& m, double k) {
    for (double& v : m.values()) v = rng.uniform(-k, k);
  };
  // embeddings see a one-hot input, so fan-in is 1
  fill(p.pitch_embedding, 1.0);
  fill(p.duration_embedding, 1.0);
  for (Matrix* m : {&p.input_gate_w, &p.input_gate_b, &p.forget_gate_w, &p.candidate_w, &p.candidate_b,
                    &p.output_gate_w, &p.output_gate_b}) {
    fill(*m, k_lstm);
  }
  p.forget_gate_b.fill(1.0);
  fill(p.attention_w, k_hidden);
  fill(p.pitch_head_w, k_hidden);
  fill(p.pitch_head_b, k_hidden);
  fill(p.duration_head_w, k_hidden);
  fill(p.duration_head_b, k_hidden);
  return p;
}

std::vector<ModelParams::Named> ModelParams::tensors() {
  return {{"embedding.pitch", &pitch_embedding},
          {"embedding.duration", &duration_embedding},
          {"lstm.input_gate.weight", &input_gate_w},
          {"lstm.input_gate.bias", &input_gate_b},
          {"lstm.forget_gate.weight", &forget_gate_w},
          {"lstm.forget_gate.bias", &forget_gate_b},
          {"lstm.candidate.weight", &candidate_w},
          {"lstm.candidate.bias", &candidate_b},
          {"lstm.output_gate.weight", &output_gate_w},
          {"lstm.output_gate.bias", &output_gate_b},
          {"attention.weight", &attention_w},
          {"head.pitch.weight", &pitch_head_w},
          {"head.pitch.bias", &pitch_head_b},
          {"head.duration.weight", &duration_head_w},
          {"head.duration.bias", &duration_head_b}};
}

std::vector<ModelParams::ConstNamed> ModelParams::tensors() const {
  std::vector<ConstNamed> out;
  for (const auto& [name, m] : const_cast<ModelParams*>(this)->tensors()) out.emplace_back(name, m);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors()) n += m->size();
  return n;
}

LstmState lstm_cell_forward(std::span<const double> x, const LstmState& state, const ModelParams& params) {
  const ModelConfig& c = params.config;
  expect_size("lstm input", c.input_size(), x.size());
  expect_size("lstm hidden state", c.hidden, state.hidden.size());
  expect_size("lstm cell state", c.hidden, state.cell.size());
  check_params(params);
  std::vector<double> concat(state.hidden);
  concat.insert(concat.end(), x.begin(), x.end());
  StepOutput s = lstm_step(concat, state.cell, params);
  return LstmState{std::move(s.cell), std::move(s.hidden)};
}

AttentionResult attention(const Matrix& hidden_states, std::span<const double> query, const Matrix& weight) {
  const std::size_t h = hidden_states.cols();
  if (hidden_states.rows() == 0) throw ModelError("attention: no hidden states");
  expect_size("attention query", h, query.size());
  if (weight.rows() != h || weight.cols() != h) throw ModelError("attention: weight must be hidden x hidden");

  std::vector<double> projected(h, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const auto row = weight.row(r);
    projected[r] = std::inner_product(row.begin(), row.end(), query.begin(), 0.0);
  }
  std::vector<double> scores(hidden_states.rows());
  for (std::size_t t = 0; t < scores.size(); ++t) {
    const auto ht = hidden_states.row(t);
    scores[t] = std::inner_product(ht.begin(), ht.end(), projected.begin(), 0.0);
  }
  AttentionResult out{std::vector<double>(h, 0.0), softmax(scores)};
  for (std::size_t t = 0; t < scores.size(); ++t) {
    const auto ht = hidden_states.row(t);
    for (std::size_t k = 0; k < h; ++k) out.context[k] += out.weights[t] * ht[k];
  }
  return out;
}

ForwardResult model_forward(std::span<const TokenPair> window, const ModelParams& params) {
  const ModelConfig& c = params.config;
  check_params(params);
  if (window.empty()) throw ModelError("model_forward: empty window");
  expect_size("model_forward window", c.sql, window.size());

  const std::size_t steps = window.size();
  const std::size_t h = c.hidden;
  ForwardResult out;
  ForwardTrace& tr = out.trace;
  tr.window.assign(window.begin(), window.end());
  tr.concat = Matrix(steps, c.concat_size());
  tr.input_gate = tr.forget_gate = tr.candidate = tr.output_gate = Matrix(steps, h);
  tr.cell = tr.cell_tanh = tr.hidden = Matrix(steps, h);

  std::vector<double> prev_cell(h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenPair tok = window[t];
    if (tok.pitch < 0 || static_cast<std::size_t>(tok.pitch) >= c.pitch_vocab) {
      throw ModelError("pitch index " + std::to_string(tok.pitch) + " out of range [0, " +
                       std::to_string(c.pitch_vocab) + ")");
    }
    if (tok.duration < 0 || static_cast<std::size_t>(tok.duration) >= c.duration_vocab) {
      throw ModelError("duration index " + std::to_string(tok.duration) + " out of range [0, " +
                       std::to_string(c.duration_vocab) + ")");
    }
    auto concat = tr.concat.row(t);
    if (t > 0) std::copy_n(tr.hidden.row(t - 1).begin(), h, concat.begin());
    const auto pe = params.pitch_embedding.row(static_cast<std::size_t>(tok.pitch));
    const auto de = params.duration_embedding.row(static_cast<std::size_t>(tok.duration));
    std::copy(pe.begin(), pe.end(), concat.begin() + static_cast<std::ptrdiff_t>(h));
    std::copy(de.begin(), de.end(), concat.begin() + static_cast<std::ptrdiff_t>(h + c.pitch_embed));

    const StepOutput s = lstm_step(concat, prev_cell, params);
    std::copy(s.i.begin(), s.i.end(), tr.input_gate.row(t).begin());
    std::copy(s.f.begin(), s.f.end(), tr.forget_gate.row(t).begin());
    std::copy(s.g.begin(), s.g.end(), tr.candidate.row(t).begin());
    std::copy(s.o.begin(), s.o.end(), tr.output_gate.row(t).begin());
    std::copy(s.cell.begin(), s.cell.end(), tr.cell.row(t).begin());
    std::copy(s.cell_tanh.begin(), s.cell_tanh.end(), tr.cell_tanh.row(t).begin());
    std::copy(s.hidden.begin(), s.hidden.end(), tr.hidden.row(t).begin());
    prev_cell = s.cell;
  }

  const auto query = tr.hidden.row(steps - 1);
  AttentionResult att = attention(tr.hidden, query, params.attention_w);
  tr.projected_query.assign(h, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const auto row = params.attention_w.row(r);
    tr.projected_query[r] = std::inner_product(row.begin(), row.end(), query.begin(), 0.0);
  }
  tr.attention_weights = std::move(att.weights);
  tr.context = std::move(att.context);

  out.pitch_logits.resize(c.pitch_vocab);
  out.duration_logits.resize(c.duration_vocab);
  affine(params.pitch_head_w, tr.context, params.pitch_head_b, out.pitch_logits);
  affine(params.duration_head_w, tr.context, params.duration_head_b, out.duration_logits);
  return out;
}

std::vector<double> temperature_softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) return {};
  if (temperature < kTemperatureEpsilon) {
    std::vector<double> q(logits.size(), 0.0);
    q[static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin())] = 1.0;
    return q;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> q(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (q[i] = std::exp((logits[i] - m) / temperature));
  for (double& v : q) v /= sum;
  return q;
}

double loss(std::span<const double> pitch_logits, std::span<const double> duration_logits, TokenPair target) {
  if (target.pitch == kPadIndex || target.duration == kPadIndex) {
    throw ModelError("loss: PAD is not a valid training target");
  }
  if (target.pitch < 0 || static_cast<std::size_t>(target.pitch) >= pitch_logits.size() || target.duration < 0 ||
      static_cast<std::size_t>(target.duration) >= duration_logits.size()) {
    throw ModelError("loss: target index out of range");
  }
  return (log_sum_exp(pitch_logits) - pitch_logits[static_cast<std::size_t>(target.pitch)]) +
         (log_sum_exp(duration_logits) - duration_logits[static_cast<std::size_t>(target.duration)]);
}

void backward(const ForwardTrace& tr, TokenPair target, const ModelParams& p, ModelParams& g, double scale) {
  const ModelConfig& c = p.config;
  if (!(g.config == c)) throw ModelError("backward: gradient buffer does not match the model config");
  if (target.pitch == kPadIndex || target.duration == kPadIndex) {
    throw ModelError("backward: PAD is not a valid training target");
  }
  const std::size_t h = c.hidden;
  const std::size_t steps = tr.window.size();

  // output heads
  std::vector<double> d_context(h, 0.0);
  const auto head = [&](const Matrix& w, const Matrix& b, Matrix& gw, Matrix& gb, int tgt) {
    std::vector<double> z(w.rows());
    affine(w, tr.context, b, z);
    std::vector<double> dz = softmax(z);
    dz[static_cast<std::size_t>(tgt)] -= 1.0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double d = scale * dz[r];
      gb(r, 0) += d;
      auto grow = gw.row(r);
      const auto wrow = w.row(r);
      for (std::size_t k = 0; k < h; ++k) {
        grow[k] += d * tr.context[k];
        d_context[k] += d * wrow[k];
      }
    }
  };
  head(p.pitch_head_w, p.pitch_head_b, g.pitch_head_w, g.pitch_head_b, target.pitch);
  head(p.duration_head_w, p.duration_head_b, g.duration_head_w, g.duration_head_b, target.duration);

  // attention
  Matrix d_hidden(steps, h);
  std::vector<double> d_alpha(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto ht = tr.hidden.row(t);
    auto dht = d_hidden.row(t);
    d_alpha[t] = std::inner_product(ht.begin(), ht.end(), d_context.begin(), 0.0);
    for (std::size_t k = 0; k < h; ++k) dht[k] += tr.attention_weights[t] * d_context[k];
  }
  double weighted = 0.0;
  for (std::size_t t = 0; t < steps; ++t) weighted += tr.attention_weights[t] * d_alpha[t];
  std::vector<double> d_projected(h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double ds = tr.attention_weights[t] * (d_alpha[t] - weighted);
    const auto ht = tr.hidden.row(t);
    auto dht = d_hidden.row(t);
    for (std::size_t k = 0; k < h; ++k) {
      dht[k] += ds * tr.projected_query[k];
      d_projected[k] += ds * ht[k];
    }
  }
  const auto query = tr.hidden.row(steps - 1);
  auto d_query = d_hidden.row(steps - 1);
  for (std::size_t r = 0; r < h; ++r) {
    auto grow = g.attention_w.row(r);
    const auto wrow = p.attention_w.row(r);
    for (std::size_t k = 0; k < h; ++k) {
      grow[k] += d_projected[r] * query[k];
      d_query[k] += d_projected[r] * wrow[k];
    }
  }

  // LSTM, backwards through time
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0);
  std::vector<double> da_i(h), da_f(h), da_g(h), da_o(h);
  std::vector<double> d_concat(c.concat_size());
  for (std::size_t step = steps; step-- > 0;) {
    const auto i = tr.input_gate.row(step);
    const auto f = tr.forget_gate.row(step);
    const auto gg = tr.candidate.row(step);
    const auto o = tr.output_gate.row(step);
    const auto tc = tr.cell_tanh.row(step);
    const auto dh_direct = d_hidden.row(step);
    for (std::size_t k = 0; k < h; ++k) {
      const double dh = dh_direct[k] + dh_next[k];
      const double dc = dc_next[k] + dh * o[k] * (1.0 - tc[k] * tc[k]);
      const double c_prev = step > 0 ? tr.cell(step - 1, k) : 0.0;
      da_o[k] = dh * tc[k] * o[k] * (1.0 - o[k]);
      da_i[k] = dc * gg[k] * i[k] * (1.0 - i[k]);
      da_f[k] = dc * c_prev * f[k] * (1.0 - f[k]);
      da_g[k] = dc * i[k] * (1.0 - gg[k] * gg[k]);
      dc_next[k] = dc * f[k];
    }
    std::fill(d_concat.begin(), d_concat.end(), 0.0);
    const auto z = tr.concat.row(step);
    const auto gate = [&](const Matrix& w, Matrix& gw, Matrix& gb, const std::vector<double>& da) {
      for (std::size_t r = 0; r < h; ++r) {
        const double d = da[r];
        if (d == 0.0) continue;
        gb(r, 0) += d;
        auto grow = gw.row(r);
        const auto wrow = w.row(r);
        for (std::size_t k = 0; k < z.size(); ++k) {
          grow[k] += d * z[k];
          d_concat[k] += d * wrow[k];
        }
      }
    };
    gate(p.input_gate_w, g.input_gate_w, g.input_gate_b, da_i);
    gate(p.forget_gate_w, g.forget_gate_w, g.forget_gate_b, da_f);
    gate(p.candidate_w, g.candidate_w, g.candidate_b, da_g);
    gate(p.output_gate_w, g.output_gate_w, g.output_gate_b, da_o);

    std::copy_n(d_concat.begin(), h, dh_next.begin());
    auto pe = g.pitch_embedding.row(static_cast<std::size_t>(tr.window[step].pitch));
    auto de = g.duration_embedding.row(static_cast<std::size_t>(tr.window[step].duration));
    for (std::size_t k = 0; k < c.pitch_embed; ++k) pe[k] += d_concat[h + k];
    for (std::size_t k = 0; k < c.duration_embed; ++k) de[k] += d_concat[h + c.pitch_embed + k];
  }
}

ModelParams backward(const ForwardTrace& trace, TokenPair target, const ModelParams& params) {
  ModelParams grads = ModelParams::zeros(params.config);
  backward(trace, target, params, grads, 1.0);
  return grads;
}

std::optional<NonFiniteEntry> check_finite(const ModelParams& params) {
  for (const auto& [name, m] : params.tensors()) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      for (std::size_t col = 0; col < m->cols(); ++col) {
        const double v = (*m)(r, col);
        if (!std::isfinite(v)) return NonFiniteEntry{std::string(name), r, col, v};
      }
    }
  }
  return std::nullopt;
}

}  // namespace climatune
