#ifndef CCT_TRAINER_HPP
#define CCT_TRAINER_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cct/model.hpp"

namespace cct {

struct TrainConfig {
  double learning_rate = 5e-5;  // 2e-5 for classification fine-tuning
  int batch_size = 32;
  int max_steps = 0;
  std::uint64_t seed = 1;

  void validate() const {
    if (learning_rate <= 0.0) throw DataError("train: learning_rate must be > 0");
    if (batch_size < 1) throw DataError("train: batch_size must be >= 1");
  }
};

// Warning counters surfaced in run reports.
struct InputStats {
  std::uint64_t truncated_inputs = 0;
  std::uint64_t truncated_targets = 0;
};

// [BOS] target [EOS], with the raw target clipped to max_tgt_len tokens.
inline std::vector<int> frame_target(std::vector<int> target_ids, int max_tgt_len, InputStats* stats = nullptr) {
  if (static_cast<int>(target_ids.size()) > max_tgt_len) {
    target_ids.resize(static_cast<std::size_t>(max_tgt_len));
    if (stats != nullptr) ++stats->truncated_targets;
  }
  std::vector<int> framed;
  framed.reserve(target_ids.size() + 2);
  framed.push_back(kIdBos);
  framed.insert(framed.end(), target_ids.begin(), target_ids.end());
  framed.push_back(kIdEos);
  return framed;
}

inline std::vector<int> clip_input(std::vector<int> input_ids, int max_src_len, InputStats* stats = nullptr) {
  if (static_cast<int>(input_ids.size()) > max_src_len) {
    input_ids.resize(static_cast<std::size_t>(max_src_len));
    if (stats != nullptr) ++stats->truncated_inputs;
  }
  return input_ids;
}

inline TaskExample to_task_example(const PretrainSample& sample, const Vocabulary& vocab, const ModelConfig& cfg,
                                   InputStats* stats = nullptr) {
  TaskExample ex;
  ex.task = sample.task;
  ex.input_ids = clip_input(vocab.encode(sample.input_tokens), cfg.max_src_len, stats);
  ex.framed_target = frame_target(vocab.encode(sample.target_tokens), cfg.max_tgt_len, stats);
  return ex;
}

// Adam with bias correction; moment tensors mirror the parameter layout.
template <class S>
class AdamState {
 public:
  void init(const ModelParams<S>& params) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
    t_ = 0;
  }

  void step(ModelParams<S>& params, ModelParams<S>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto ps = tensor_spans(params);
    auto gs = tensor_spans(grads);
    auto ms = tensor_spans(m_);
    auto vs = tensor_spans(v_);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      S* p = ps[i].first;
      S* g = gs[i].first;
      S* m = ms[i].first;
      S* v = vs[i].first;
      for (std::size_t j = 0; j < ps[i].second; ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * gj;
        const double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * gj * gj;
        m[j] = static_cast<S>(mj);
        v[j] = static_cast<S>(vj);
        p[j] -= static_cast<S>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps_));
      }
    }
  }

 private:
  static std::vector<std::pair<S*, std::size_t>> tensor_spans(ModelParams<S>& p) {
    std::vector<std::pair<S*, std::size_t>> out;
    p.for_each_tensor([&](const char*, auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
    return out;
  }

  ModelParams<S> m_, v_;
  std::int64_t t_ = 0;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
};

using TaskBatch = std::map<PretrainTask, std::vector<TaskExample>>;

// Owns the optimizer state for a parameter set; one writer at a time.
// Each step is a pure function of (params, batch, step index, seed).
template <class S>
class Trainer {
 public:
  Trainer(ModelParams<S>& params, TrainConfig cfg)
      : params_(params), cfg_(cfg), dropout_rng_(mix64(cfg.seed ^ 0x5eedd10bULL)) {
    adam_.init(params);
    grads_ = params.zeros_like();
  }

  // One update on the combined pre-training loss; returns the pre-update
  // loss. Throws NumericError on a non-finite loss or gradient.
  double step(const TaskBatch& batch, std::map<PretrainTask, double>* per_task = nullptr) {
    grads_.set_zero();
    Rng* drop = params_.config.dropout_rate > 0.0 ? &dropout_rng_ : nullptr;
    bool any = false;
    double loss = 0.0;
    for (const auto& [task, examples] : batch) {
      double task_loss = 0.0;
      for (const TaskExample& ex : examples) {
        task_loss += seq2seq_loss_and_grad(params_, ex.input_ids, ex.framed_target, grads_, drop);
        any = true;
      }
      if (per_task != nullptr) (*per_task)[task] += task_loss;
      loss += task_loss;
    }
    if (!any) throw DataError("train: empty batch");
    check_finite(loss);
    adam_.step(params_, grads_, cfg_.learning_rate);
    return loss;
  }

  // One update on a plain sequence-to-sequence batch (fine-tuning).
  double step_examples(const std::vector<TaskExample>& batch) {
    grads_.set_zero();
    Rng* drop = params_.config.dropout_rate > 0.0 ? &dropout_rng_ : nullptr;
    if (batch.empty()) throw DataError("train: empty batch");
    double loss = 0.0;
    for (const TaskExample& ex : batch) {
      loss += seq2seq_loss_and_grad(params_, ex.input_ids, ex.framed_target, grads_, drop);
    }
    check_finite(loss);
    adam_.step(params_, grads_, cfg_.learning_rate);
    return loss;
  }

  // One update on the classification head (binary cross-entropy through the
  // encoder); returns the summed pre-update loss.
  double step_classify(const std::vector<std::pair<std::vector<int>, bool>>& batch) {
    grads_.set_zero();
    double loss = 0.0;
    for (const auto& [ids, label] : batch) loss += classify_loss_and_grad(params_, ids, label, grads_);
    check_finite(loss);
    adam_.step(params_, grads_, cfg_.learning_rate);
    return loss;
  }

  const TrainConfig& config() const { return cfg_; }

 private:
  void check_finite(double loss) const {
    if (!std::isfinite(loss)) throw NumericError("training aborted: non-finite loss");
    if (!grads_.all_finite()) throw NumericError("training aborted: non-finite gradient");
  }

  ModelParams<S>& params_;
  TrainConfig cfg_;
  AdamState<S> adam_;
  ModelParams<S> grads_;
  Rng dropout_rng_;
};

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, config block, named float32 tensors (Eigen
// column-major coefficient order).
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_i64(std::ostream& out, std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline std::int64_t read_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'C', 'C', 'T', 'C', 'K', 'P', 'T', '\0'};

template <class S>
void save_checkpoint(const ModelParams<S>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  detail::write_u32(out, 1);  // version
  const ModelConfig& c = params.config;
  for (int v : {c.num_layers, c.num_heads, c.d_model, c.d_ff, c.vocab_size, c.max_src_len, c.max_tgt_len}) {
    detail::write_i64(out, v);
  }
  out.write(reinterpret_cast<const char*>(&c.dropout_rate), sizeof(double));

  std::uint64_t count = 0;
  params.for_each_tensor([&](const char*, const auto&) { ++count; });
  detail::write_i64(out, static_cast<std::int64_t>(count));
  params.for_each_tensor([&](const char* name, const auto& t) {
    const std::string n(name);
    detail::write_u32(out, static_cast<std::uint32_t>(n.size()));
    out.write(n.data(), static_cast<std::streamsize>(n.size()));
    detail::write_i64(out, t.rows());
    detail::write_i64(out, t.cols());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const float f = static_cast<float>(t.data()[i]);
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  });
  if (!out) throw DataError("checkpoint write failed: " + path);
}

template <class S = float>
ModelParams<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kCheckpointMagic, 8)) {
    throw DataError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = detail::read_u32(in);
  if (version != 1) throw DataError("unsupported checkpoint version");
  ModelConfig cfg;
  cfg.num_layers = static_cast<int>(detail::read_i64(in));
  cfg.num_heads = static_cast<int>(detail::read_i64(in));
  cfg.d_model = static_cast<int>(detail::read_i64(in));
  cfg.d_ff = static_cast<int>(detail::read_i64(in));
  cfg.vocab_size = static_cast<int>(detail::read_i64(in));
  cfg.max_src_len = static_cast<int>(detail::read_i64(in));
  cfg.max_tgt_len = static_cast<int>(detail::read_i64(in));
  in.read(reinterpret_cast<char*>(&cfg.dropout_rate), sizeof(double));

  ModelParams<S> params = init_params<S>(cfg, 0);
  const std::int64_t count = detail::read_i64(in);
  std::int64_t seen = 0;
  params.for_each_tensor([&](const char* name, auto& t) {
    ++seen;
    const std::uint32_t name_len = detail::read_u32(in);
    std::string n(name_len, '\0');
    in.read(n.data(), name_len);
    if (n != name) throw DataError("checkpoint tensor order mismatch: expected " + std::string(name) + ", got " + n);
    const std::int64_t rows = detail::read_i64(in);
    const std::int64_t cols = detail::read_i64(in);
    if (rows != t.rows() || cols != t.cols()) throw DataError("checkpoint tensor shape mismatch for " + n);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      float f = 0.0f;
      in.read(reinterpret_cast<char*>(&f), sizeof(float));
      t.data()[i] = static_cast<S>(f);
    }
  });
  if (seen != count) throw DataError("checkpoint tensor count mismatch");
  if (!in) throw DataError("checkpoint truncated: " + path);
  return params;
}

// CSV loss trace: `step,task,loss`.
struct TraceRow {
  int step = 0;
  std::string task;
  double loss = 0.0;
};

inline void write_trace(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write loss trace: " + path);
  out << "step,task,loss\n";
  for (const TraceRow& r : rows) out << r.step << ',' << r.task << ',' << r.loss << '\n';
}

}  // namespace cct

#endif  // CCT_TRAINER_HPP
