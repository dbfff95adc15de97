#pragma once

#include <stdexcept>
#include <string>

namespace taxflow {

// Every precondition or certificate failure in the library surfaces as this type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw Error(what);
}

}  // namespace taxflow
