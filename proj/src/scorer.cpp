#include "gce/scorer.hpp"

#include "gce/errors.hpp"

namespace gce {

ScorerParams ScorerParams::create(ModelParams& params, ParamInit& init, std::size_t d_rnn) {
  ScorerParams s;
  s.utterance = Affine::create(params, init, "scorer.utt", d_rnn, 1);
  s.omega = params.add("scorer.omega", {1, 1}, {1.0});
  s.null_action = params.add("scorer.null_action", {1, d_rnn}, init.fan_in(d_rnn, d_rnn));
  return s;
}

ad::Tensor score_utterance(ad::Graph& g, const ad::Tensor& utterance_hidden,
                           const ad::Tensor& value_context, const Affine& head) {
  const ad::Tensor scores = g.matmul_nt(utterance_hidden, value_context);
  const ad::Tensor summary = attend(g, scores, utterance_hidden);
  return head.apply(g, summary);
}

ad::Tensor score_actions(ad::Graph& g, const ad::Tensor& action_contexts,
                         const ad::Tensor& utterance_context, const ad::Tensor& value_context) {
  const ad::Tensor scores = g.matmul_nt(action_contexts, utterance_context);
  const ad::Tensor summary = attend(g, scores, action_contexts);
  return g.matmul_nt(summary, value_context);
}

ad::Tensor combine_scores(ad::Graph& g, const ad::Tensor& y_utt, const ad::Tensor& y_act,
                          const ad::Tensor& omega) {
  if (y_utt.size() != 1 || y_act.size() != 1 || omega.size() != 1) {
    throw ShapeError("combine_scores expects scalars");
  }
  return g.sigmoid(g.add(y_utt, g.mul(y_act, omega)));
}

}  // namespace gce
