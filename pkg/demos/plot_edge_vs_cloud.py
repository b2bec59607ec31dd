"""
Serving delay at the edge and in the cloud
==========================================

Sweep the request volume for both shipped deployments and compare the
shipped model profiles.
"""

from edgelgnb.edgesim import compare_profiles, delay_curve, load_deployment, load_profile

cloud = delay_curve(load_deployment("cloud_default"), range(1, 13), seed=0)
edge = delay_curve(load_deployment("edge_default"), range(1, 13), seed=0)

# the cloud pays a thread wake-up cost at low volume and queues above 8 requests/thread/s
print("volume  cloud_ms  edge_ms")
for c, e in zip(cloud.rows, edge.rows):
    print(f"{c.volume:6d}  {c.mean_ms:8.1f}  {e.mean_ms:7.1f}")

# model footprint: signed differences, first profile minus second
report = compare_profiles(load_profile("lgnb_profile"), load_profile("cinc2017_profile"))
print(report["summary"])
