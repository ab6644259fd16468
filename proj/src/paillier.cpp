#include "ccftl/paillier.hpp"

#include <string>

#include "ccftl/error.hpp"

namespace ccftl::fed {

namespace {

constexpr int kPrimeReps = 40;
constexpr int kMaxKeygenAttempts = 64;

mpz_class random_prime(gmp_randclass& rng, unsigned bits) {
  for (int attempt = 0; attempt < kMaxKeygenAttempts; ++attempt) {
    mpz_class candidate = rng.get_z_bits(bits);
    mpz_setbit(candidate.get_mpz_t(), bits - 1);
    mpz_setbit(candidate.get_mpz_t(), bits - 2);
    mpz_class p;
    mpz_nextprime(p.get_mpz_t(), candidate.get_mpz_t());
    if (mpz_sizeinbase(p.get_mpz_t(), 2) == bits && mpz_probab_prime_p(p.get_mpz_t(), kPrimeReps) > 0) {
      return p;
    }
  }
  fail(ErrorKind::crypto, "keygen: prime generation failed");
}

mpz_class pow_mod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

std::size_t bit_length(const mpz_class& v) { return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2); }

}  // namespace

Keypair keypair_from_primes(const mpz_class& p, const mpz_class& q) {
  require(p != q, ErrorKind::crypto, "keypair: primes must be distinct");
  require(mpz_probab_prime_p(p.get_mpz_t(), kPrimeReps) > 0 && mpz_probab_prime_p(q.get_mpz_t(), kPrimeReps) > 0,
          ErrorKind::crypto, "keypair: inputs must be prime");
  Keypair k;
  k.pub.n = p * q;
  k.pub.n_squared = k.pub.n * k.pub.n;
  const mpz_class pm1 = p - 1;
  const mpz_class qm1 = q - 1;
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), k.pub.n.get_mpz_t(), mpz_class(pm1 * qm1).get_mpz_t());
  require(g == 1, ErrorKind::crypto, "keypair: gcd(n, phi(n)) must be 1");
  mpz_lcm(k.sec.lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
  require(mpz_invert(k.sec.mu.get_mpz_t(), k.sec.lambda.get_mpz_t(), k.pub.n.get_mpz_t()) != 0, ErrorKind::crypto,
          "keypair: lambda not invertible mod n");
  return k;
}

Keypair keygen(unsigned key_bits, std::uint64_t seed) {
  require(key_bits >= kMinKeyBits && key_bits % 2 == 0, ErrorKind::crypto,
          "keygen: key_bits must be even and >= " + std::to_string(kMinKeyBits));
  gmp_randclass rng(gmp_randinit_mt);
  rng.seed(mpz_class(std::to_string(seed)));
  for (int attempt = 0; attempt < kMaxKeygenAttempts; ++attempt) {
    const mpz_class p = random_prime(rng, key_bits / 2);
    const mpz_class q = random_prime(rng, key_bits / 2);
    if (p == q) continue;
    const mpz_class n = p * q;
    if (bit_length(n) != key_bits) continue;
    try {
      return keypair_from_primes(p, q);
    } catch (const Error&) {
      continue;
    }
  }
  fail(ErrorKind::crypto, "keygen: no valid keypair after bounded retries");
}

mpz_class encrypt(const PublicKey& pub, const mpz_class& m, const mpz_class& r) {
  require(m >= 0 && m < pub.n, ErrorKind::out_of_range, "encrypt: plaintext outside [0, n)");
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t());
  require(r > 0 && g == 1, ErrorKind::crypto, "encrypt: randomness must be a unit mod n");
  // g^m = (1 + n)^m = 1 + m n (mod n^2)
  mpz_class c = (1 + m * pub.n) % pub.n_squared;
  c = (c * pow_mod(r, pub.n, pub.n_squared)) % pub.n_squared;
  return c;
}

mpz_class decrypt(const PublicKey& pub, const SecretKey& sec, const mpz_class& c) {
  require(c > 0 && c < pub.n_squared, ErrorKind::crypto, "decrypt: ciphertext outside (0, n^2)");
  const mpz_class u = pow_mod(c, sec.lambda, pub.n_squared);
  mpz_class l = (u - 1) / pub.n;
  return (l * sec.mu) % pub.n;
}

mpz_class add_ciphertexts(const PublicKey& pub, const mpz_class& a, const mpz_class& b) {
  return (a * b) % pub.n_squared;
}

NonceSource::NonceSource(std::uint64_t seed) : state_(std::make_unique<gmp_randclass>(gmp_randinit_mt)) {
  state_->seed(mpz_class(std::to_string(seed)));
}

NonceSource::~NonceSource() = default;

mpz_class NonceSource::draw(const PublicKey& pub) {
  for (;;) {
    mpz_class r = state_->get_z_range(pub.n);
    if (r == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t());
    if (g == 1) return r;
  }
}

CipherVector encrypt_vector(const PublicKey& pub, const FixedPointVector& f, std::uint64_t seed,
                            unsigned headroom_bits) {
  require(headroom_bits >= 1 && headroom_bits <= 16, ErrorKind::invalid_argument,
          "encrypt_vector: headroom must be in [1, 16] bits");
  CipherVector out;
  out.modulus = pub.n;
  out.count = f.values.size();
  out.scale_bits = f.scale_bits;
  out.slot_bits = kEncodedBits + headroom_bits;
  out.slots_per_cipher = (bit_length(pub.n) - 1) / out.slot_bits;
  require(out.slots_per_cipher >= 1, ErrorKind::out_of_range,
          "encrypt_vector: key too small to hold one offset plaintext slot");

  const mpz_class offset = mpz_class(1) << (kEncodedBits - 1);
  const mpz_class slot_limit = mpz_class(1) << kEncodedBits;
  NonceSource nonces(seed);
  out.ciphertexts.reserve((out.count + out.slots_per_cipher - 1) / out.slots_per_cipher);
  for (std::size_t start = 0; start < out.count; start += out.slots_per_cipher) {
    const std::size_t stop = std::min(out.count, start + out.slots_per_cipher);
    mpz_class packed = 0;
    // Slot 0 of each ciphertext holds the lowest-index coordinate.
    for (std::size_t i = stop; i-- > start;) {
      const mpz_class shifted = mpz_class(static_cast<long>(f.values[i])) + offset;
      require(shifted >= 0 && shifted < slot_limit, ErrorKind::out_of_range,
              "encrypt_vector: encoded value outside the offset range");
      packed <<= out.slot_bits;
      packed += shifted;
    }
    out.ciphertexts.push_back(encrypt(pub, packed, nonces.draw(pub)));
  }
  return out;
}

CipherVector add_cipher(const CipherVector& a, const CipherVector& b) {
  require(a.modulus == b.modulus, ErrorKind::crypto, "add_cipher: ciphertexts under different keys");
  require(a.scale_bits == b.scale_bits && a.slot_bits == b.slot_bits && a.slots_per_cipher == b.slots_per_cipher &&
              a.count == b.count && a.ciphertexts.size() == b.ciphertexts.size(),
          ErrorKind::crypto, "add_cipher: scale or layout mismatch");
  require(a.addends + b.addends <= a.max_addends(), ErrorKind::out_of_range,
          "add_cipher: slot headroom exhausted");
  CipherVector out = a;
  out.addends = a.addends + b.addends;
  const mpz_class n_squared = a.modulus * a.modulus;
  for (std::size_t i = 0; i < out.ciphertexts.size(); ++i) {
    out.ciphertexts[i] = (a.ciphertexts[i] * b.ciphertexts[i]) % n_squared;
  }
  return out;
}

FixedPointVector decrypt_vector(const Keypair& keys, const CipherVector& c) {
  require(c.modulus == keys.pub.n, ErrorKind::crypto, "decrypt_vector: ciphertext was made under another key");
  const mpz_class slot_mask = (mpz_class(1) << c.slot_bits) - 1;
  const mpz_class slot_limit = mpz_class(c.addends) << kEncodedBits;
  const mpz_class offset = mpz_class(c.addends) << (kEncodedBits - 1);
  FixedPointVector out;
  out.scale_bits = c.scale_bits;
  out.values.reserve(c.count);
  for (std::size_t k = 0; k < c.ciphertexts.size(); ++k) {
    mpz_class m = decrypt(keys.pub, keys.sec, c.ciphertexts[k]);
    const std::size_t slots = std::min(c.slots_per_cipher, c.count - k * c.slots_per_cipher);
    require(bit_length(m) <= slots * c.slot_bits, ErrorKind::crypto,
            "decrypt_vector: plaintext out of range (wrong key?)");
    for (std::size_t s = 0; s < slots; ++s) {
      const mpz_class slot = m & slot_mask;
      m >>= c.slot_bits;
      require(slot < slot_limit, ErrorKind::crypto, "decrypt_vector: slot out of range (wrong key?)");
      const mpz_class value = slot - offset;
      out.values.push_back(value.get_si());
    }
  }
  return out;
}

}  // namespace ccftl::fed
