#pragma once

namespace n2v {

/// Reduce-on-plateau learning-rate schedule. After `patience` consecutive
/// epochs whose validation loss fails to beat the best so far by at least
/// `min_delta`, the rate becomes max(lr * factor, min_lr) and the wait restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience, double factor, double min_lr, double min_delta = 1e-6);

  /// Feeds one epoch's validation loss; returns the rate for the next epoch.
  double observe(double val_loss);
  double lr() const noexcept { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double min_lr_;
  double min_delta_;
  double best_;
  int wait_ = 0;
};

}  // namespace n2v
