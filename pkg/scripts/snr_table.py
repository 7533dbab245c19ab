"""Stream-level SNR before/after classification for the fiber-link and emitter scenarios."""
from photonids.metrics import snr_gain, snr_table, snr_table_text

print(snr_table_text(snr_table(4000, (300, 3000, 20000), 0.997, 0.032)))
print()
before = snr_gain(20, 2.5, 1.0, 1.0)
print(f"emitter: S = 20/s, B = 2.5/s -> {before.snr_db:.2f} dB")
for g in (29.0, 30.0, 31.0):
    r = snr_gain(20, 2.5, g * 0.032, 0.032)
    print(f"  G = {g:.0f}: {r.snr_prime_db:.2f} dB")
