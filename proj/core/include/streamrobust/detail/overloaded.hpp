#pragma once

namespace streamrobust::detail {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace streamrobust::detail
