#include "prolt/training.hpp"

#include <numeric>
#include <sstream>

#include <json.hpp>

#include "prolt/errors.hpp"
#include "prolt/losses.hpp"
#include "prolt/metrics.hpp"
#include "prolt/softmax.hpp"

namespace prolt {
namespace {

ClassifierShape shape_for(const FeatureBundle& bundle, const TrainConfig& cfg, std::size_t semantic_dim) {
  return {bundle.dim, semantic_dim, cfg.hidden_dim, cfg.embed_dim, cfg.dropout, cfg.temperature};
}

double selection_metric(const EvalReport& r) {
  if (r.auc) return *r.auc;
  if (r.best_seen) return *r.best_seen;
  return r.best_unseen.value_or(0.0);
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

void append(std::vector<std::span<double>>& a, std::vector<std::span<double>> b) {
  a.insert(a.end(), b.begin(), b.end());
}

void append(std::vector<std::span<const double>>& a, std::vector<std::span<const double>> b) {
  a.insert(a.end(), b.begin(), b.end());
}

std::vector<std::size_t> concat_sizes(const PrototypeClassifier& a, const PrototypeClassifier& b) {
  auto s = a.parameter_sizes();
  auto t = b.parameter_sizes();
  s.insert(s.end(), t.begin(), t.end());
  return s;
}

// Tracks the best validation metric and the patience window.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}
  // Returns true when this epoch is the new best.
  bool update(std::size_t epoch, double metric) {
    if (!has_best_ || metric > best_) {
      has_best_ = true;
      best_ = metric;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }
  bool should_stop(std::size_t epoch) const { return has_best_ && epoch - best_epoch_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  bool has_best_ = false;
  double best_ = 0.0;
  std::size_t best_epoch_ = 0;
};

void independent_step(PrototypeClassifier& cs, PrototypeClassifier& co, Adam& adam, const Matrix& x,
                      std::span<const std::size_t> states, std::span<const std::size_t> objects,
                      const SemanticTable& sem, Rng& rng, double& loss_out) {
  const auto fs = cs.forward(x, sem.states, true, rng);
  const auto fo = co.forward(x, sem.objects, true, rng);
  const auto loss = loss_ic(fs.logits, fo.logits, states, objects);
  const auto gs = cs.backward(fs, loss.state_grad);
  const auto go = co.backward(fo, loss.object_grad);
  auto params = cs.parameters();
  append(params, co.parameters());
  auto grads = gs.views();
  append(grads, go.views());
  adam.step(params, grads);
  loss_out = loss.loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (batch_size == 0) throw ValidationError("batch size must be at least 1");
  if (patience == 0) throw ValidationError("patience must be at least 1");
  if (!(eta >= 0.0)) throw ValidationError("eta must be non-negative");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (hidden_dim == 0 || embed_dim == 0) throw ValidationError("network widths must be positive");
}

std::string TrainTrace::to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::json j;
    j["stage"] = stage;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["val_metric"] = e.val_metric;
    j["val_auc"] = e.val_auc ? nlohmann::json(*e.val_auc) : nlohmann::json(nullptr);
    j["val_hm"] = e.val_hm ? nlohmann::json(*e.val_hm) : nlohmann::json(nullptr);
    j["chosen"] = e.epoch == chosen_epoch;
    out << j.dump() << '\n';
  }
  return out.str();
}

Stage1Result train_stage1(const FeatureBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  const auto train = select(bundle, Split::train);
  const auto val = select(bundle, Split::val);
  if (train.size() == 0) throw ValidationError("training split is empty");
  if (val.size() == 0) throw ValidationError("validation split is empty");
  const auto& sem = bundle.semantics;

  Rng root(cfg.seed);
  Rng init = root.fork(10);
  Rng loop = root.fork(11);
  const auto shape = shape_for(bundle, cfg, sem.dim());
  Stage1Result result;
  result.state_clf = PrototypeClassifier::create(shape, init);
  result.object_clf = PrototypeClassifier::create(shape, init);
  result.trace.stage = "stage1";

  PrototypeClassifier cs = result.state_clf;
  PrototypeClassifier co = result.object_clf;
  Adam adam(cfg.adam(), concat_sizes(cs, co));
  EarlyStopper stopper(cfg.patience);
  std::vector<std::size_t> order(train.size());

  for (std::size_t epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    loop.shuffle(order);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        std::span<const std::size_t> idx(order.data() + start, end - start);
        double loss = 0.0;
        independent_step(cs, co, adam, train.features.gather_rows(idx), pick(train.states, idx),
                         pick(train.objects, idx), sem, loop, loss);
        loss_sum += loss * static_cast<double>(idx.size());
      }
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("stage 1 diverged at epoch ") + std::to_string(epoch) + ": " + e.what());
    }
    const Matrix ps = softmax_rows(cs.logits(val.features, sem.states));
    const Matrix po = softmax_rows(co.logits(val.features, sem.objects));
    const auto report = bias_sweep(attribute_product_scores(ps, po, bundle.space), val.pairs, bundle.space);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), selection_metric(report), report.auc,
                    report.best_hm};
    result.trace.epochs.push_back(rec);
    if (stopper.update(epoch, rec.val_metric)) {
      result.state_clf = cs;
      result.object_clf = co;
      result.trace.chosen_epoch = epoch;
    }
    if (stopper.should_stop(epoch)) break;
  }
  return result;
}

AttributePriorTable make_prior(PriorMode mode, const FeatureBundle& bundle, const PrototypeClassifier& state_clf,
                               const PrototypeClassifier& object_clf, KForm form) {
  const auto& space = bundle.space;
  const auto train = select(bundle, Split::train);
  switch (mode) {
    case PriorMode::attribute:
      return estimate_attribute_prior(state_clf, object_clf, train.features, bundle.semantics, space, form);
    case PriorMode::class_frequency: {
      AttributePriorTable t;
      t.k = class_frequency_prior(train.pairs, space);
      t.state_prior.assign(space.num_states(), 0.0);
      t.object_prior.assign(space.num_objects(), 0.0);
      for (std::size_t y = 0; y < space.size(); ++y) {
        t.state_prior[space.pair(y).state] += t.k[y];
        t.object_prior[space.pair(y).object] += t.k[y];
      }
      return t;
    }
    case PriorMode::none: {
      AttributePriorTable t;
      t.k = uniform_prior(space);
      t.state_prior.assign(space.num_states(), 1.0 / static_cast<double>(space.num_states()));
      t.object_prior.assign(space.num_objects(), 1.0 / static_cast<double>(space.num_objects()));
      return t;
    }
  }
  throw ContractError("unknown prior mode");
}

Stage2Result train_stage2(const FeatureBundle& bundle, const PrototypeClassifier& state_clf,
                          const PrototypeClassifier& object_clf, const TrainConfig& cfg,
                          const InferenceConfig& val_inference) {
  cfg.validate();
  const auto& space = bundle.space;
  const auto& sem = bundle.semantics;
  const auto train = select(bundle, Split::train);
  const auto val = select(bundle, Split::val);
  if (train.size() == 0) throw ValidationError("training split is empty");
  if (val.size() == 0) throw ValidationError("validation split is empty");

  Rng root(cfg.seed);
  Rng init = root.fork(20);
  Rng loop = root.fork(21);

  const std::size_t n_classes = cfg.seen_classes_only ? space.num_seen() : space.size();
  const Matrix all_sem = sem.compositions(space);
  std::vector<std::size_t> class_rows(n_classes);
  std::iota(class_rows.begin(), class_rows.end(), 0);
  const Matrix class_sem = all_sem.gather_rows(class_rows);

  Stage2Result result;
  result.state_clf = state_clf;
  result.object_clf = object_clf;
  result.prior = make_prior(cfg.prior, bundle, state_clf, object_clf, cfg.k_form);
  result.composition_clf = PrototypeClassifier::create(shape_for(bundle, cfg, 2 * sem.dim()), init);
  result.trace.stage = "stage2";

  PrototypeClassifier cy = result.composition_clf;
  PrototypeClassifier cs = state_clf;
  PrototypeClassifier co = object_clf;
  AttributePriorTable prior = result.prior;
  Adam adam(cfg.adam(), cy.parameter_sizes());
  std::optional<Adam> attr_adam;
  if (cfg.cotrain) attr_adam.emplace(cfg.adam(), concat_sizes(cs, co));
  EarlyStopper stopper(cfg.patience);
  std::vector<std::size_t> order(train.size());

  const bool adjust_val = val_inference.mode == ScoreMode::adjusted && val_inference.use_prior &&
                          cfg.eta != 0.0 && cfg.prior != PriorMode::none;
  const bool needs_attributes = adjust_val || val_inference.mode == ScoreMode::ensemble;
  Matrix val_ps, val_po;
  auto refresh_val_attributes = [&] {
    if (!needs_attributes) return;
    val_ps = softmax_rows(cs.logits(val.features, sem.states));
    val_po = softmax_rows(co.logits(val.features, sem.objects));
  };
  refresh_val_attributes();

  for (std::size_t epoch = 1; epoch <= cfg.stage2_epochs; ++epoch) {
    if (cfg.prior_refresh > 0 && cfg.prior == PriorMode::attribute && epoch > 1 &&
        (epoch - 1) % cfg.prior_refresh == 0) {
      prior = make_prior(cfg.prior, bundle, cs, co, cfg.k_form);
      prior.epoch = epoch - 1;
    }
    const std::span<const double> k(prior.k.data(), n_classes);

    std::iota(order.begin(), order.end(), 0);
    loop.shuffle(order);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        std::span<const std::size_t> idx(order.data() + start, end - start);
        const Matrix x = train.features.gather_rows(idx);
        const auto labels = pick(train.pairs, idx);
        const auto fwd = cy.forward(x, class_sem, true, loop);
        const auto loss = loss_cls(fwd.logits, labels, k, cfg.eta);
        const auto grads = cy.backward(fwd, loss.grad);
        auto params = cy.parameters();
        adam.step(params, grads.views());
        loss_sum += loss.loss * static_cast<double>(idx.size());
        if (attr_adam) {
          double unused = 0.0;
          independent_step(cs, co, *attr_adam, x, pick(train.states, idx), pick(train.objects, idx), sem, loop,
                           unused);
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("stage 2 diverged at epoch ") + std::to_string(epoch) + ": " + e.what());
    }
    if (attr_adam) refresh_val_attributes();

    const Matrix cy_val = cy.logits(val.features, all_sem);
    Matrix scores;
    if (val_inference.mode == ScoreMode::ensemble) {
      scores = ensemble_posterior(softmax_rows(cy_val), val_ps, val_po, EnsembleConfig{val_inference.delta}, space);
    } else if (adjust_val) {
      scores = adjusted_scores(cy_val, val_ps, val_po, prior.k, space, val_inference.lambda, cfg.eta);
    } else {
      scores = cy_val;
    }
    const auto report = bias_sweep(scores, val.pairs, space);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), selection_metric(report), report.auc,
                    report.best_hm};
    result.trace.epochs.push_back(rec);
    if (stopper.update(epoch, rec.val_metric)) {
      result.composition_clf = cy;
      result.prior = prior;
      result.state_clf = cs;
      result.object_clf = co;
      result.trace.chosen_epoch = epoch;
    }
    if (stopper.should_stop(epoch)) break;
  }
  return result;
}

}  // namespace prolt
