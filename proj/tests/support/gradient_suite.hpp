#pragma once

// Finite-difference cases for every differentiable op and composed module.
// Each case maps a seed to the worst rel_err over all checked inputs.

#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "spivg/fusion.hpp"
#include "spivg/reasoner.hpp"
#include "spivg/spike.hpp"
#include "spivg/textfuse.hpp"

namespace oracle {

struct GradCase {
  std::string name;
  double tolerance;
  std::function<double(spivg::Rng&)> run;
};

inline std::pair<std::size_t, std::size_t> small_dims(spivg::Rng& rng) {
  return {rng.uniform_int(1, 4), rng.uniform_int(1, 4)};
}

inline std::vector<GradCase> op_cases() {
  using namespace spivg::grad;
  using spivg::Rng;
  std::vector<GradCase> cases = {
      {"add", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng), oracle::random_tensor({n}, rng)},
                                  [](auto&, const auto& v) { return sum(hadamard(add(v[0], v[1]), v[0])); });
       }},
      {"sub", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng), oracle::random_tensor({m, n}, rng)},
                                  [](auto&, const auto& v) { return sum(hadamard(sub(v[0], v[1]), v[1])); });
       }},
      {"div", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng), oracle::random_tensor({1}, rng, 1.0, 2.0)},
                                  [](auto&, const auto& v) { return sum(div(v[0], v[1])); });
       }},
      {"scalar_mul", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng)}, [](auto&, const auto& v) {
           return sum(hadamard(scalar_mul(v[0], -1.7), v[0]));
         });
       }},
      {"mean", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng)},
                                  [](auto&, const auto& v) { return hadamard(mean(v[0]), mean(v[0])); });
       }},
      {"sigmoid", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng, -3, 3)},
                                  [](auto&, const auto& v) { return sum(sigmoid(v[0])); });
       }},
      {"gelu", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng, -3, 3)},
                                  [](auto&, const auto& v) { return sum(gelu(v[0])); });
       }},
      {"exp", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng)},
                                  [](auto&, const auto& v) { return sum(exp(v[0])); });
       }},
      {"log", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng, 0.5, 2.0)},
                                  [](auto&, const auto& v) { return sum(log(v[0])); });
       }},
      {"abs", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         auto t = oracle::random_tensor({m, n}, rng);
         for (auto& x : t.data()) x += x >= 0 ? 0.1 : -0.1;  // keep away from the kink
         return oracle::gradcheck({t}, [](auto&, const auto& v) { return sum(hadamard(abs(v[0]), v[0])); });
       }},
      {"matmul", 1e-4, [](Rng& rng) {
         auto [m, k] = small_dims(rng);
         const std::size_t n = rng.uniform_int(1, 4);
         return oracle::gradcheck({oracle::random_tensor({m, k}, rng), oracle::random_tensor({k, n}, rng)},
                                  [](auto&, const auto& v) {
                                    auto p = matmul(v[0], v[1]);
                                    return sum(hadamard(p, p));
                                  });
       }},
      {"l2_norm_rows", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng, 0.2, 1.0)},
                                  [](auto&, const auto& v) { return sum(l2_norm_rows(v[0])); });
       }},
      {"concat", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng), oracle::random_tensor({2, n}, rng)},
                                  [](auto&, const auto& v) {
                                    auto c = concat<double>({v[0], v[1]});
                                    return sum(hadamard(c, c));
                                  });
       }},
      {"slice_reshape", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         return oracle::gradcheck({oracle::random_tensor({m + 1, n}, rng)}, [m = m, n = n](auto&, const auto& v) {
           auto s = reshape(slice_rows(v[0], 1, m + 1), {m * n});
           return sum(hadamard(s, s));
         });
       }},
      {"dropout", 1e-4, [](Rng& rng) {
         auto [m, n] = small_dims(rng);
         const std::uint64_t seed = rng.next_u64();
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng)}, [seed](auto&, const auto& v) {
           Rng mask_rng(seed);
           auto d = dropout(v[0], 0.6, mask_rng);
           return sum(hadamard(d, d));
         });
       }},
      {"neighbor_mean", 1e-4, [](Rng& rng) {
         const std::size_t m = rng.uniform_int(2, 5);
         const std::size_t n = rng.uniform_int(1, 3);
         std::vector<std::vector<std::size_t>> nb(m);
         for (std::size_t i = 0; i < m; ++i) {
           for (std::size_t j = 0; j < m; ++j) {
             if (j != i && rng.bernoulli(0.5)) nb[i].push_back(j);
           }
         }
         return oracle::gradcheck({oracle::random_tensor({m, n}, rng)}, [nb](auto&, const auto& v) {
           auto a = neighbor_mean(v[0], nb);
           return sum(hadamard(a, v[0]));
         });
       }},
      {"bce_loss", 1e-4, [](Rng& rng) {
         const std::size_t n = rng.uniform_int(1, 6);
         Tensor<double> y({n});
         for (auto& v : y.data()) v = rng.uniform();
         return oracle::gradcheck({oracle::random_tensor({n}, rng, 0.05, 0.95)},
                                  [y](auto&, const auto& v) { return bce_loss(v[0], y); });
       }},
  };
  return cases;
}

inline std::vector<GradCase> module_cases() {
  using namespace spivg;
  using grad::Tape;
  std::vector<GradCase> cases;
  for (int kind = 0; kind < 4; ++kind) {
    const auto neuron = static_cast<spike::NeuronKind>(kind);
    cases.push_back({"snn_relaxed_" + std::string(spike::to_string(neuron)), 1e-3, [neuron](Rng& rng) {
                       spike::NeuronConfig cfg;
                       cfg.kind = neuron;
                       cfg.refractory_steps = static_cast<int>(rng.uniform_int(0, 2));
                       const std::size_t n = rng.uniform_int(3, 12);
                       const auto weights = random_tensor({n}, rng);
                       const auto input = random_tensor({n}, rng, 0.0, 1.0);
                       const auto c_m = Tensor<double>::scalar(rng.uniform(0.8, 1.5));
                       const auto g_l = Tensor<double>::scalar(rng.uniform(0.05, 0.4));
                       const auto e_l = Tensor<double>::scalar(rng.uniform(-0.2, 0.2));
                       const auto gain = Tensor<double>::scalar(rng.uniform(0.5, 1.5));
                       return gradcheck({input, c_m, g_l, e_l, gain}, [&](auto& tape, const auto& v) {
                         auto s = spike::snn_layer(v[0], v[1], v[2], v[3], v[4], cfg, spike::SpikeOutput::kRelaxed);
                         return grad::sum(grad::hadamard(s, tape.constant(weights)));
                       }, 1e-6);
                     }});
  }
  cases.push_back({"zscore", 1e-4, [](Rng& rng) {
                     const std::size_t n = rng.uniform_int(2, 10);
                     const auto w = random_tensor({n}, rng);
                     return gradcheck({random_tensor({n}, rng)}, [&](auto& tape, const auto& v) {
                       return grad::sum(grad::hadamard(spike::zscore(v[0]), tape.constant(w)));
                     });
                   }});
  cases.push_back({"reasoner_channel", 1e-4, [](Rng& rng) {
                     reasoner::ReasonerConfig cfg;
                     cfg.layers = 2;
                     cfg.hidden_dim = 4;
                     cfg.tau_cos = 0.3;
                     reasoner::ReasonerChannel<double> ch(3, cfg, rng);
                     const auto g = reasoner::build_graph(5, 2, static_cast<reasoner::GraphKind>(rng.uniform_int(0, 2)));
                     auto x = random_tensor({5, 3}, rng);
                     x.set_requires_grad(true);
                     const auto probe = random_tensor({5}, rng);
                     grad::ParamList<double> params;
                     ch.collect("ch", params);
                     std::vector<Tensor<double>*> tensors{&x};
                     for (auto& [name, t] : params) {
                       if (t->requires_grad()) tensors.push_back(t);
                     }
                     return module_gradcheck(tensors, [&](bool backward) {
                       Tape<double> tape;
                       auto s = ch(backward ? tape.parameter(x) : tape.constant(x), g);
                       auto loss = grad::sum(grad::hadamard(s, tape.constant(probe)));
                       if (backward) tape.backward(loss);
                       return loss.value()[0];
                     });
                   }});
  cases.push_back({"fusion_posterior", 1e-4, [](Rng& rng) {
                     fusion::FusionConfig cfg;
                     cfg.sigmay_inv = rng.uniform(0, 0.5);
                     const std::size_t n = rng.uniform_int(5, 10);
                     const auto probe = random_tensor({n}, rng);
                     std::vector<Tensor<double>> inputs{random_tensor({3}, rng), random_tensor({4}, rng)};
                     for (int i = 0; i < 4; ++i) inputs.push_back(random_tensor({n}, rng, 0.0, 1.0));
                     return gradcheck(inputs, [&](auto& tape, const auto& v) {
                       std::vector<Var<double>> ch(v.begin() + 2, v.end());
                       auto mu = fusion::FusionModule<double>::posterior(v[0], v[1], ch, cfg);
                       return grad::sum(grad::hadamard(mu, tape.constant(probe)));
                     }, 1e-6);
                   }});
  cases.push_back({"text_gate", 1e-4, [](Rng& rng) {
                     textfuse::FusionGate<double> g(3, 4, 5, rng);
                     for (auto& v : g.b.data()) v = rng.uniform(-1, 1);
                     std::vector<double> q1(3), q2(3);
                     for (auto& v : q1) v = rng.uniform(-1, 1);
                     for (auto& v : q2) v = rng.uniform(-1, 1);
                     auto x = random_tensor({5, 4}, rng);
                     x.set_requires_grad(true);
                     const auto probe = random_tensor({5, 4}, rng);
                     return module_gradcheck({&g.w1, &g.w2, &g.w3, &g.b, &x}, [&](bool backward) {
                       Tape<double> tape;
                       auto out = textfuse::fuse_sequence(g, {q1, q2}, backward ? tape.parameter(x) : tape.constant(x));
                       auto loss = grad::sum(grad::hadamard(out, tape.constant(probe)));
                       if (backward) tape.backward(loss);
                       return loss.value()[0];
                     });
                   }});
  return cases;
}

}  // namespace oracle
