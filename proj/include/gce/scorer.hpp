#pragma once

#include <string>

#include "gce/autodiff.hpp"
#include "gce/layers.hpp"

namespace gce {

// Parameters of the turn-level scorer, shared across slots.
struct ScorerParams {
  Affine utterance;        // q_utt -> y_utt, d_rnn -> 1
  ad::Tensor omega;        // [1 x 1] action-score weight, initialized to 1
  ad::Tensor null_action;  // [1 x d_rnn] sentinel appended to every action pool

  static ScorerParams create(ModelParams& params, ParamInit& init, std::size_t d_rnn);
};

// Attention of the candidate value over the utterance states:
//   a_i = H_i . c_val, p = softmax(a), q = sum_i p_i H_i, y_utt = W q + b.
ad::Tensor score_utterance(ad::Graph& g, const ad::Tensor& utterance_hidden,
                           const ad::Tensor& value_context, const Affine& head);

// Attention of the utterance context over the prior system actions:
//   a_j = C_j . c_utt, p = softmax(a), q = sum_j p_j C_j, y_act = q . c_val.
// action_contexts stacks one row per action, null action included.
ad::Tensor score_actions(ad::Graph& g, const ad::Tensor& action_contexts,
                         const ad::Tensor& utterance_context, const ad::Tensor& value_context);

// sigmoid(y_utt + omega * y_act)
ad::Tensor combine_scores(ad::Graph& g, const ad::Tensor& y_utt, const ad::Tensor& y_act,
                          const ad::Tensor& omega);

struct SlotValueScore {
  std::string slot;
  std::string value;
  double y_utt = 0.0;
  double y_act = 0.0;
  double y = 0.5;
};

}  // namespace gce
