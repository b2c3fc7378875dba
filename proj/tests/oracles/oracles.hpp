#pragma once

// Reference implementations written for clarity rather than speed. Tests
// compare the library against these.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace csb::oracle {

struct EditCost {
  std::size_t edits = 0;   // S + D + I
  std::size_t indels = 0;  // D + I, minimized among minimum-edit scripts
  bool operator==(const EditCost&) const = default;
};

// Enumerates every edit script by plain recursion (no memoization).
EditCost exhaustive_edit(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Greedy cosine matching on raw (unnormalized) vectors.
Prf naive_bertscore(const std::vector<std::vector<double>>& ref, const std::vector<std::vector<double>>& hyp);

// tau-a by enumerating system pairs.
double naive_kendall(const std::vector<std::pair<std::string, double>>& a,
                     const std::vector<std::pair<std::string, double>>& b);

struct Signals {
  double h_mix, h_alt, h_morph, h_len, h_vocab, composite;
};

// The five capped linear signals and their weighted sum, each signal
// optionally rounded to one decimal.
Signals hscore(double n, double m, double k, double b, double ttr, bool latin_only, bool round_signals);

}  // namespace csb::oracle
