#include "n2v/schedule.hpp"

#include <algorithm>
#include <limits>

#include "n2v/errors.hpp"

namespace n2v {

PlateauScheduler::PlateauScheduler(double initial_lr, int patience, double factor, double min_lr, double min_delta)
    : lr_(initial_lr),
      patience_(patience),
      factor_(factor),
      min_lr_(min_lr),
      min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {
  if (!(initial_lr >= 0.0)) throw InvalidArgument("plateau: lr must be >= 0");
  if (patience < 1) throw InvalidArgument("plateau: patience must be >= 1");
  if (!(factor > 0.0 && factor < 1.0)) throw InvalidArgument("plateau: factor must be in (0, 1)");
  if (!(min_lr >= 0.0)) throw InvalidArgument("plateau: min_lr must be >= 0");
}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    wait_ = 0;
    return lr_;
  }
  if (++wait_ >= patience_) {
    lr_ = std::min(lr_, std::max(lr_ * factor_, min_lr_));
    wait_ = 0;
  }
  return lr_;
}

}  // namespace n2v
