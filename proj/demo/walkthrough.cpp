// Fits a small model on synthetic data, prints one predictive distribution
// and a 5-fold cross-validation summary.

#include <iomanip>
#include <iostream>

#include "bsord/bsord.hpp"

int main() {
  using namespace bsord;
  const Dataset ds = synthesize(600, 4, 6, 0.2, 7);

  TrainConfig config;
  config.epochs = 60;
  const FitResult fitted = fit(ds, config);
  const OrdinalModel& model = fitted.model;
  std::cout << "K=" << model.k_states << " states, tree depth n=" << model.n_bits << ", hidden h=" << model.h_hidden
            << "\nloss " << fitted.history.initial_loss << " -> " << fitted.history.epoch_loss.back() << "\n\n";

  const Vector raw = ds.features.row(0).transpose();
  const Vector x = model.standardize({raw.data(), static_cast<std::size_t>(raw.size())});
  const auto dist = predict_distribution(model, x);
  std::cout << "row 0, true state " << ds.labels[0] << ":\n" << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < dist.size(); ++k) {
    std::cout << "  state " << k << "  code ";
    for (auto b : encode_state(static_cast<std::int64_t>(k), model.n_bits)) std::cout << int{b};
    std::cout << "  p=" << dist[k] << '\n';
  }
  std::cout << "prediction " << argmax(dist) << "\n\n";

  CvOptions options;
  options.k_folds = 5;
  options.n_resamples = 500;
  std::cout << render_report_table(cross_validate(ds, config, 42, options));
}
