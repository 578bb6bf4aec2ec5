#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <string>
#include <vector>

#include "smnist/generator.hpp"

namespace smnist {

using BigInt = boost::multiprecision::cpp_int;

// Exact binomial coefficient C(p, n). Throws std::domain_error when n > p.
BigInt n_choose_k(std::uint64_t p, std::uint64_t n);
// Falling factorial p!/(p-n)!. Throws std::domain_error when n > p.
BigInt variations(std::uint64_t p, std::uint64_t n);

struct SupplyRow {
  int label = 0;
  BigInt theoretical_train;
  BigInt theoretical_test;
  std::size_t observed_train = 0;
  std::size_t observed_test = 0;
};

struct SupplyTable {
  // Positions available to each split, e.g. 72/28; both equal the universe
  // when the splits share it.
  std::size_t train_positions = 0;
  std::size_t test_positions = 0;
  bool shared = true;
  std::vector<SupplyRow> rows;
};

struct VerificationReport {
  SupplyTable table;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

// Validates a generated (or reloaded) pair against the constraints of its
// spec: structure, generation-log consistency, partition containment,
// uniqueness, the zero-image rule, supply bounds and exhausted-label caps.
VerificationReport verify_dataset(const DatasetPair& pair, const DatasetSpec& spec);
inline VerificationReport verify_dataset(const DatasetPair& pair) {
  return verify_dataset(pair, pair.spec);
}

// Aligned text table: dots | theoretical train/test | statistics train/test.
std::string render_supply_table(const SupplyTable& table);
std::string render_report(const VerificationReport& report);

}  // namespace smnist
