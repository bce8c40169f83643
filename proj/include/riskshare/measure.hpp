#pragma once

#include <cstddef>
#include <string>

namespace riskshare {

/// Probability measure under which losses are simulated or moments are taken:
/// a reference model P_k (k may be the counterparty index) or the optimal Q*.
class Measure {
 public:
  enum class Kind { reference, q_star };

  static Measure reference(std::size_t index) { return Measure(Kind::reference, index); }
  static Measure q_star() { return Measure(Kind::q_star, 0); }

  Kind kind() const noexcept { return kind_; }
  bool is_q_star() const noexcept { return kind_ == Kind::q_star; }
  std::size_t index() const noexcept { return index_; }

  friend bool operator==(const Measure&, const Measure&) = default;

 private:
  Measure(Kind kind, std::size_t index) : kind_(kind), index_(index) {}
  Kind kind_;
  std::size_t index_;
};

}  // namespace riskshare
