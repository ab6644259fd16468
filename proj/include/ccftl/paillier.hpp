#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <gmpxx.h>

#include "ccftl/fixed_point.hpp"

namespace ccftl::fed {

inline constexpr unsigned kDefaultKeyBits = 2048;
/// Smallest modulus keygen() accepts; the textbook toy key goes through
/// keypair_from_primes() instead.
inline constexpr unsigned kMinKeyBits = 128;

/// Paillier public key with generator g = n + 1.
struct PublicKey {
  mpz_class n;
  mpz_class n_squared;

  bool operator==(const PublicKey& o) const { return n == o.n; }
};

struct SecretKey {
  mpz_class lambda;  // lcm(p-1, q-1)
  mpz_class mu;      // lambda^-1 mod n
};

struct Keypair {
  PublicKey pub;
  SecretKey sec;
};

Keypair keygen(unsigned key_bits, std::uint64_t seed);
/// Builds a keypair from explicit distinct primes; used for the n = 35 toy key.
Keypair keypair_from_primes(const mpz_class& p, const mpz_class& q);

/// (1 + m n) r^n mod n^2. Requires 0 <= m < n and gcd(r, n) = 1.
mpz_class encrypt(const PublicKey& pub, const mpz_class& m, const mpz_class& r);
mpz_class decrypt(const PublicKey& pub, const SecretKey& sec, const mpz_class& c);
/// Ciphertext product mod n^2, which decrypts to the plaintext sum mod n.
mpz_class add_ciphertexts(const PublicKey& pub, const mpz_class& a, const mpz_class& b);

/// Seeded source of encryption randomness in Z*_n.
class NonceSource {
 public:
  explicit NonceSource(std::uint64_t seed);
  ~NonceSource();
  NonceSource(const NonceSource&) = delete;
  NonceSource& operator=(const NonceSource&) = delete;

  mpz_class draw(const PublicKey& pub);

 private:
  std::unique_ptr<gmp_randclass> state_;
};

/// Encrypted fixed-point vector. Each encoded value is offset by 2^31 into
/// [0, 2^32) and several such slots are packed per plaintext, so one
/// ciphertext carries `slots_per_cipher` coordinates. Slots leave headroom
/// for summing up to 2^(slot_bits - 32) encryptions.
struct CipherVector {
  std::vector<mpz_class> ciphertexts;
  mpz_class modulus;  // n of the encrypting key
  std::size_t count = 0;
  int scale_bits = kDefaultScaleBits;
  unsigned slot_bits = 0;
  std::size_t slots_per_cipher = 0;
  /// Number of encryptions summed into this vector.
  std::size_t addends = 1;

  std::size_t max_addends() const { return std::size_t{1} << (slot_bits - kEncodedBits); }
};

inline constexpr unsigned kDefaultSlotHeadroomBits = 8;

CipherVector encrypt_vector(const PublicKey& pub, const FixedPointVector& f, std::uint64_t seed,
                            unsigned headroom_bits = kDefaultSlotHeadroomBits);
CipherVector add_cipher(const CipherVector& a, const CipherVector& b);
/// Recovers the summed fixed-point integers with all offsets removed.
FixedPointVector decrypt_vector(const Keypair& keys, const CipherVector& c);

}  // namespace ccftl::fed
