// Compiled as part of the test suite: the controller service must build
// without any private-key material in scope.
#include "cipherloop/controller_service.hpp"

#ifdef CIPHERLOOP_PRIVATE_KEY_MATERIAL
#error "controller_service.hpp pulls in private-key material"
#endif

namespace {

/// Converts to anything, standing in for a private key.
struct Anything {
  template <class T>
  operator const T&() const;
};

// Argument-dependent lookup finds any decrypt overload declared next to PublicKey.
template <class... Args>
concept CanDecrypt = requires(Args... args) { decrypt(args...); };

static_assert(!CanDecrypt<Anything, cipherloop::paillier::PublicKey, cipherloop::paillier::Ciphertext>);

}  // namespace

int main() { return 0; }
