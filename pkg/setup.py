from setuptools import setup

setup(
    name='qeflim',
    version='0.1.0',
    description='Quantum-emitter fluorescence lifetime imaging',
    packages=['qeflim', 'qeflim.ldos', 'qeflim.tagstream', 'qeflim.simulation',
              'qeflim.reconstruct', 'qeflim.calibrate', 'qeflim.utils'],
    install_requires=['numpy', 'scipy', 'matplotlib', 'pandas', 'tqdm'],
    entry_points={'console_scripts': ['qeflim = qeflim.cli:main']},
)
