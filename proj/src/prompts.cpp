#include "tpeval/prompts.hpp"

namespace tpeval::prompts {

std::string edit_clause(int counter) {
  return std::string(kEditClausePrefix) + std::to_string(counter) +
         kEditClauseSuffix;
}

}  // namespace tpeval::prompts
