#include "gradcases.hpp"

#include "cpsfuse/fusenet.hpp"
#include "cpsfuse/rng.hpp"

namespace cpsfuse::oracle {

namespace {

using grad::Graph;
using grad::Tensor;
using grad::Var;

// Weighted sum with fixed random weights so no gradient is symmetric.
Var probe(Graph& g, Var x, const Tensor& weights) {
  return g.sum(g.mul(x, g.constant(weights)));
}

std::size_t count(const std::vector<Tensor*>& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->size();
  return n;
}

GradCase run(const std::string& name, const grad::Objective& f, const std::vector<Tensor*>& params) {
  const auto report = grad::finite_diff_check(f, params);
  return {name, report.max_relative_error, count(params)};
}

}  // namespace

std::vector<GradCase> fusenet_gradient_cases(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t T = 4, d = 3, h = 3;
  std::vector<GradCase> out;

  auto seq = Tensor::uniform(T, d, 1.0, rng);
  auto lstm = fusenet::BiLstmParams::init(d, h, rng);
  const auto w_dir = Tensor::uniform(T, h, 1.0, rng, false);
  const auto w_bi = Tensor::uniform(T, 2 * h, 1.0, rng, false);

  for (bool reverse : {false, true}) {
    auto& dir = reverse ? lstm.backward : lstm.forward;
    out.push_back(run(reverse ? "lstm_direction (reverse)" : "lstm_direction (forward)",
                      [&](Graph& g) {
                        fusenet::Binding bind(g);
                        return probe(g, fusenet::lstm_direction(bind, bind(seq), dir, h, reverse), w_dir);
                      },
                      {&seq, &dir.w_ih, &dir.w_hh, &dir.bias}));
  }

  std::vector<Tensor*> bi_params{&seq};
  for (auto* p : lstm.tensors()) bi_params.push_back(p);
  out.push_back(run("bilstm_forward",
                    [&](Graph& g) {
                      fusenet::Binding bind(g);
                      return probe(g, fusenet::bilstm_forward(bind, bind(seq), lstm), w_bi);
                    },
                    bi_params));

  auto H = Tensor::uniform(T, 2 * h, 1.0, rng);
  auto attn = fusenet::AttnPoolParams::init(2 * h, rng);
  const auto w_vec = Tensor::uniform(1, 2 * h, 1.0, rng, false);
  const auto w_weights = Tensor::uniform(T, 1, 1.0, rng, false);
  out.push_back(run("attention_pool",
                    [&](Graph& g) {
                      fusenet::Binding bind(g);
                      const auto pooled = fusenet::attention_pool(bind, bind(H), attn);
                      return g.add(probe(g, pooled.vector, w_vec), probe(g, pooled.weights, w_weights));
                    },
                    {&H, &attn.score}));

  auto a = Tensor::uniform(1, 2, 1.0, rng);
  auto b = Tensor::uniform(1, 3, 1.0, rng);
  auto head = fusenet::LinearParams::init(5, 4, rng);
  out.push_back(run("fuse + linear head + cross_entropy",
                    [&](Graph& g) {
                      fusenet::Binding bind(g);
                      const auto z = fusenet::fuse(g, bind(a), bind(b));
                      const auto logits = g.add(g.matmul(z, bind(head.weight)), bind(head.bias));
                      return g.cross_entropy(logits, {2});
                    },
                    {&a, &b, &head.weight, &head.bias}));

  auto branch = fusenet::Branch::init(d, h, rng);
  const auto w_branch = Tensor::uniform(1, 2 * h, 1.0, rng, false);
  auto branch_params = branch.tensors();
  branch_params.push_back(&seq);
  out.push_back(run("branch encode",
                    [&](Graph& g) {
                      fusenet::Binding bind(g);
                      return probe(g, branch.encode(bind, bind(seq)), w_branch);
                    },
                    branch_params));

  fusenet::ModelDims dims{d, 2, h, 2};
  const auto text = Tensor::uniform(T, d, 1.0, rng, false);
  const auto audio = Tensor::uniform(5, 2, 1.0, rng, false);
  fusenet::TextClassifier text_model({"A", "B", "C"}, dims, derive_seed(seed, 1));
  const fusenet::NeuralInstance x{"x", &text, &audio, "B"};
  out.push_back(run("TextClassifier",
                    [&](Graph& g) {
                      fusenet::Binding bind(g);
                      return g.cross_entropy(text_model.logits(bind, x), {1});
                    },
                    text_model.parameters()));

  fusenet::FusionClassifier fusion_model({"A", "B", "C"}, dims, derive_seed(seed, 2));
  out.push_back(run("FusionClassifier",
                    [&](Graph& g) {
                      fusenet::Binding bind(g);
                      return g.cross_entropy(fusion_model.logits(bind, x), {1});
                    },
                    fusion_model.parameters()));
  return out;
}

}  // namespace cpsfuse::oracle
